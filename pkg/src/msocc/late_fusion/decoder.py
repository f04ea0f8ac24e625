"""3D decoder from the fused volume to per-voxel class logits at 2x grid."""

from .. import diffmath as dm
from ..diffmath import ParameterStore, Tensor


def decode_occupancy(store: ParameterStore, v_f: Tensor, class_count: int) -> Tensor:
    """Two conv blocks, a stride-2 transposed-conv upsample, and a 1x1x1 head.

    v_f: (D, H, W, C). Returns logits (2D, 2H, 2W, class_count). With no
    biases anywhere, a zero input yields identically zero (uniform) logits.
    """
    d, h, w, c = v_f.data.shape
    x = dm.relu(dm.conv3d_cl(v_f, store.param("dec.c0", (c, c, 3, 3, 3))))
    x = dm.relu(dm.conv3d_cl(x, store.param("dec.c1", (c, c, 3, 3, 3))))
    x = dm.relu(dm.conv_transpose3d_cl(x, store.param("dec.up", (2, 2, 2, c, c))))
    head = store.param("dec.head", (c, class_count))
    logits = dm.matmul(dm.reshape(x, (8 * d * h * w, c)), head)
    return dm.reshape(logits, (2 * d, 2 * h, 2 * w, class_count))
