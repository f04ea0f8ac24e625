"""Image backbone, depth encoder, and the per-scale depth-image fusion.

All three are small conv stacks over channels-last feature maps, with
parameters held in a ParameterStore under fixed names, so calling them for
several camera views reuses the same weights.  Convolutions carry no bias:
a zero input stays zero through every stack, which keeps "no prior" depth
pixels inert at initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffmath as dm
from ..diffmath import ParameterStore, Tensor
from .depth import DepthMap


@dataclass(frozen=True)
class FeatureMapPyramid:
    """Per-scale feature maps for one view, finest first, halving each level."""

    scales: tuple[Tensor, ...]

    def __post_init__(self) -> None:
        if not self.scales:
            raise ValueError("pyramid needs at least one scale")
        for a, b in zip(self.scales, self.scales[1:]):
            ha, wa = a.data.shape[:2]
            hb, wb = b.data.shape[:2]
            if (hb, wb) != ((ha + 1) // 2, (wa + 1) // 2):
                raise ValueError(
                    f"scale dims {hb}x{wb} are not half of {ha}x{wa}"
                )

    def __len__(self) -> int:
        return len(self.scales)

    def __getitem__(self, i: int) -> Tensor:
        return self.scales[i]


def image_backbone(
    store: ParameterStore, image: np.ndarray, channels: int = 16, scales: int = 2
) -> FeatureMapPyramid:
    """Encode one RGB image into a feature pyramid.

    image: (H, W, 3) uint8.  Each scale level is a stride-2 conv + relu
    followed by a stride-1 conv + relu, so level i has dims H/2^(i+1).
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got {image.shape}")
    h = Tensor(image.astype(np.float32) / 255.0 - 0.5)
    in_ch = 3
    feats = []
    for i in range(scales):
        w0 = store.param(f"backbone.s{i}.c0", (channels, in_ch, 3, 3))
        h = dm.relu(dm.conv2d_cl(h, w0, stride=2))
        w1 = store.param(f"backbone.s{i}.c1", (channels, channels, 3, 3))
        h = dm.relu(dm.conv2d_cl(h, w1, stride=1))
        feats.append(h)
        in_ch = channels
    return FeatureMapPyramid(scales=tuple(feats))


def encode_depth(
    store: ParameterStore,
    dmap: DepthMap,
    max_range: float,
    channels: int = 8,
    scales: int = 2,
) -> list[Tensor]:
    """Encode a depth prior map into per-scale features.

    The map is normalized by the maximum lidar range before encoding; the
    conv stack mirrors the backbone's downsampling so each output aligns
    spatially with the matching image pyramid level.
    """
    if max_range <= 0:
        raise ValueError(f"max_range must be positive, got {max_range}")
    h = Tensor((dmap.values / max_range)[..., None].astype(np.float32))
    in_ch = 1
    feats = []
    for i in range(scales):
        w0 = store.param(f"phi.s{i}.c0", (channels, in_ch, 3, 3))
        h = dm.relu(dm.conv2d_cl(h, w0, stride=2))
        w1 = store.param(f"phi.s{i}.c1", (channels, channels, 3, 3))
        h = dm.relu(dm.conv2d_cl(h, w1, stride=1))
        feats.append(h)
        in_ch = channels
    return feats


def fuse_depth_image(
    store: ParameterStore, f_e: Tensor, f_i: Tensor, scale: int
) -> Tensor:
    """Fuse depth features into image features at one pyramid scale.

    Channel-concatenates the two maps, then a 1x1 conv + relu + 1x1 conv
    projects back to the image feature width, so the output replaces the
    image features one for one.
    """
    he, we, ce = f_e.data.shape
    hi, wi, ci = f_i.data.shape
    if (he, we) != (hi, wi):
        raise ValueError(
            f"depth features {he}x{we} do not align with image features {hi}x{wi}"
        )
    cat = dm.concat([f_e, f_i], axis=2)
    flat = dm.reshape(cat, (he * we, ce + ci))
    w1 = store.param(f"psi.s{scale}.w1", (ce + ci, ci))
    hmid = dm.relu(dm.matmul(flat, w1))
    w2 = store.param(f"psi.s{scale}.w2", (ci, ci))
    out = dm.matmul(hmid, w2)
    return dm.reshape(out, (he, we, ci))


def depth_aware_features(
    store: ParameterStore,
    image: np.ndarray,
    dmap: DepthMap,
    max_range: float,
    image_channels: int = 16,
    depth_channels: int = 8,
    scales: int = 2,
) -> FeatureMapPyramid:
    """Full per-view path: backbone + depth encoder + per-scale fusion."""
    f_i = image_backbone(store, image, channels=image_channels, scales=scales)
    f_e = encode_depth(store, dmap, max_range, channels=depth_channels, scales=scales)
    fused = [
        fuse_depth_image(store, f_e[i], f_i[i], scale=i) for i in range(scales)
    ]
    return FeatureMapPyramid(scales=tuple(fused))
