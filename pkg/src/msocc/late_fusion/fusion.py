"""Late-stage fusion of the camera and lidar voxel volumes.

Two confidence heads rank voxels per modality; the top-K of each branch
meet in a joint refinement (self-attention by default, with summation
and concatenation ablations), while a sigmoid gate blends the two dense
volumes everywhere. Refined rows then overwrite the blended grid at
their positions.
"""

import math
from dataclasses import dataclass

import numpy as np

from .. import diffmath as dm
from ..diffmath import ParameterStore, Tensor

HCCVF_MODES = ("self_attention", "summation", "concatenation")


@dataclass(frozen=True)
class ConfidenceField:
    """Per-voxel class probabilities from one modality's head."""

    probs: Tensor  # (D, H, W, classes), rows on the simplex

    def __post_init__(self) -> None:
        if self.probs.data.ndim != 4:
            raise ValueError(f"probs must be (D, H, W, classes), got {self.probs.data.shape}")

    @property
    def confidence(self) -> np.ndarray:
        return self.probs.data.max(axis=-1)

    @property
    def classes(self) -> np.ndarray:
        return self.probs.data.argmax(axis=-1)


def confidence_heads(
    store: ParameterStore, v_l: Tensor, v_i: Tensor, class_count: int
) -> tuple[ConfidenceField, ConfidenceField]:
    """Separate 1x1x1 softmax classification heads over both volumes."""
    if v_l.data.shape != v_i.data.shape:
        raise ValueError(
            f"volume dimensions differ: {v_l.data.shape} vs {v_i.data.shape}"
        )
    d, h, w, c = v_l.data.shape

    def head(volume, name):
        wt = store.param(name, (c, class_count))
        logits = dm.matmul(dm.reshape(volume, (d * h * w, c)), wt)
        return ConfidenceField(
            probs=dm.reshape(dm.softmax(logits, axis=-1), (d, h, w, class_count))
        )

    return head(v_l, "conf.lidar.w"), head(v_i, "conf.cam.w")


def topk_select(confidence: np.ndarray, k: int) -> np.ndarray:
    """Flat indices of the k most confident voxels, descending.

    Ties break toward the smaller linear index; fewer than k voxels
    returns them all.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    conf = np.asarray(confidence).ravel()
    order = np.lexsort((np.arange(conf.size), -conf))
    return order[: min(k, conf.size)]


def _positional_embedding(store, positions, spec, cprime):
    """MLP over normalized (x, y, z) voxel-center coordinates."""
    d, h, w = spec.dims
    z, rem = np.divmod(positions, h * w)
    y, x = np.divmod(rem, w)
    coords = np.stack(
        [(x + 0.5) / w, (y + 0.5) / h, (z + 0.5) / d], axis=1
    ).astype(np.float32)
    w1 = store.param("hccvf.pos.w1", (3, cprime))
    w2 = store.param("hccvf.pos.w2", (cprime, cprime))
    return dm.matmul(dm.relu(dm.matmul(Tensor(coords), w1)), w2)


def _attention_block(store, tokens, cprime, n_heads):
    """Pre-norm self-attention + FFN with residuals over (S, C') tokens."""
    if cprime % n_heads:
        raise ValueError(f"token width {cprime} not divisible by {n_heads} heads")
    dh = cprime // n_heads
    scale = 1.0 / math.sqrt(dh)
    x = tokens
    normed = dm.layer_norm(x, axis=-1)
    heads = []
    for a in range(n_heads):
        q = dm.matmul(normed, store.param(f"hccvf.attn.q{a}", (cprime, dh)))
        k = dm.matmul(normed, store.param(f"hccvf.attn.k{a}", (cprime, dh)))
        v = dm.matmul(normed, store.param(f"hccvf.attn.v{a}", (cprime, dh)))
        attn = dm.softmax(dm.mul(dm.matmul(q, dm.transpose(k, (1, 0))), scale), axis=-1)
        heads.append(dm.matmul(attn, v))
    wo = store.param("hccvf.attn.wo", (cprime, cprime))
    x = dm.add(x, dm.matmul(dm.concat(heads, axis=1), wo))
    f = dm.layer_norm(x, axis=-1)
    w1 = store.param("hccvf.ffn.w1", (cprime, 2 * cprime))
    w2 = store.param("hccvf.ffn.w2", (2 * cprime, cprime))
    return dm.add(x, dm.matmul(dm.relu(dm.matmul(f, w1)), w2))


def hccvf_fuse(
    store: ParameterStore,
    top_l: tuple[np.ndarray, Tensor],
    top_i: tuple[np.ndarray, Tensor],
    spec,
    cprime: int = 64,
    mode: str = "self_attention",
    n_heads: int = 2,
) -> tuple[np.ndarray, Tensor]:
    """Jointly refine the top-K voxel features of both modalities.

    top_l / top_i: (flat voxel positions, (K, C) features). Returns the
    unique union of positions (ascending) and one refined (N, C) feature
    row per position; positions selected by both modalities average their
    two refined vectors (summation mode sums them instead).
    """
    if mode not in HCCVF_MODES:
        raise ValueError(f"unknown fusion mode '{mode}'")
    pos_l, feat_l = top_l
    pos_i, feat_i = top_i
    c = feat_l.data.shape[1] if len(pos_l) else feat_i.data.shape[1]
    positions = np.concatenate([pos_l, pos_i]).astype(np.int64)
    if positions.size == 0:
        return positions, Tensor(np.zeros((0, c), np.float32))

    f_l = store.param("hccvf.fl", (c, cprime))
    f_c = store.param("hccvf.fc", (c, cprime))
    tok_l = dm.matmul(feat_l, f_l) if len(pos_l) else None
    tok_i = dm.matmul(feat_i, f_c) if len(pos_i) else None
    if tok_l is not None and tok_i is not None:
        tokens = dm.concat([tok_l, tok_i], axis=0)
    else:
        tokens = tok_l if tok_l is not None else tok_i

    uniq, inverse, counts = np.unique(positions, return_inverse=True, return_counts=True)
    if mode == "self_attention":
        tokens = dm.add(tokens, _positional_embedding(store, positions, spec, cprime))
        refined = _attention_block(store, tokens, cprime, n_heads)
        merged = dm.mul(
            dm.scatter_add_nc(inverse, refined, uniq.size),
            (1.0 / counts)[:, None].astype(np.float32),
        )
    elif mode == "summation":
        merged = dm.scatter_add_nc(inverse, tokens, uniq.size)
    else:  # concatenation: absent modalities read as a zero lane
        zero_lane = Tensor(np.zeros((uniq.size, cprime), np.float32))
        lane_l = dm.scatter_add_nc(inverse[: len(pos_l)], tok_l, uniq.size) \
            if tok_l is not None else zero_lane
        lane_i = dm.scatter_add_nc(inverse[len(pos_l):], tok_i, uniq.size) \
            if tok_i is not None else zero_lane
        cat = dm.concat([lane_l, lane_i], axis=1)
        merged = dm.matmul(cat, store.param("hccvf.catw", (2 * cprime, cprime)))

    out = dm.matmul(merged, store.param("hccvf.out.w", (cprime, c)))
    return uniq, out


def adaptive_fuse(
    store: ParameterStore, v_l: Tensor, v_i: Tensor
) -> tuple[Tensor, Tensor]:
    """Per-voxel sigmoid-gated convex blend of the two volumes.

    A 3x3x3 conv over the channel-concatenated volumes produces one
    logit per voxel, standardized across the grid, shifted by a learned
    bias, and squashed; the gate weights the camera volume and its
    complement the lidar volume. Returns (blended volume, gate).
    """
    if v_l.data.shape != v_i.data.shape:
        raise ValueError(
            f"volume dimensions differ: {v_l.data.shape} vs {v_i.data.shape}"
        )
    d, h, w, c = v_l.data.shape
    cat = dm.concat([v_l, v_i], axis=3)
    wt = store.param("af.w", (1, 2 * c, 3, 3, 3))
    logits = dm.reshape(dm.conv3d_cl(cat, wt), (d * h * w, 1))
    normed = dm.layer_norm(logits, axis=0)
    gate = dm.reshape(
        dm.sigmoid(dm.add(normed, store.param("af.b", (1,), init="zeros"))),
        (d, h, w, 1),
    )
    blended = dm.add(dm.mul(gate, v_i), dm.mul(dm.sub(1.0, gate), v_l))
    return blended, gate


def scatter_replace(volume: Tensor, positions: np.ndarray, rows: Tensor) -> Tensor:
    """Copy of a (D, H, W, C) volume with rows at flat positions replaced."""
    d, h, w, c = volume.data.shape
    positions = np.asarray(positions, np.int64)
    if positions.size and (positions.min() < 0 or positions.max() >= d * h * w):
        raise IndexError("replacement position outside the grid")
    if positions.size == 0:
        return volume
    flat = dm.scatter_replace_rows(dm.reshape(volume, (d * h * w, c)), positions, rows)
    return dm.reshape(flat, (d, h, w, c))
