"""Lift per-view image features into the camera-branch voxel volume.

Each scale-0 feature pixel predicts a probability distribution over a
fixed set of metric depth bins; the pixel's feature, weighted by each
bin's probability, is sum-pooled into the voxel containing the 3D point
at that bin's depth along the pixel ray. Out-of-grid points are dropped.
"""

import numpy as np

from .. import diffmath as dm
from ..diffmath import ParameterStore, Tensor

DEFAULT_D_BINS = 32
DEFAULT_NEAR = 0.5

# Scale-0 feature maps come from one stride-2 convolution, so feature
# pixel (i, j) is centered on image pixel ((j + .5) * 2, (i + .5) * 2).
FEATURE_STRIDE = 2


def depth_bin_centers(d_bins: int, near: float, far: float) -> np.ndarray:
    """Centers of d_bins equal-width metric depth bins spanning [near, far]."""
    if d_bins < 1:
        raise ValueError(f"need at least one depth bin, got {d_bins}")
    if not near < far:
        raise ValueError(f"empty depth range [{near}, {far}]")
    width = (far - near) / d_bins
    return near + (np.arange(d_bins, dtype=np.float64) + 0.5) * width


def depth_bin_index(depths: np.ndarray, d_bins: int, near: float, far: float) -> np.ndarray:
    """Bin index per depth, clipped into [0, d_bins); inverse of the centers."""
    width = (far - near) / d_bins
    idx = np.floor((np.asarray(depths, np.float64) - near) / width).astype(np.int64)
    return np.clip(idx, 0, d_bins - 1)


def predict_depth_distribution(
    store: ParameterStore, feat: Tensor, d_bins: int = DEFAULT_D_BINS
) -> Tensor:
    """Per-pixel softmax distribution over depth bins from scale-0 features.

    feat: (h, w, C) Tensor. Returns (h, w, d_bins), rows on the simplex.
    """
    h, w, c = feat.data.shape
    head = store.param("depth_head.w", (c, d_bins))
    logits = dm.matmul(dm.reshape(feat, (h * w, c)), head)
    return dm.reshape(dm.softmax(logits, axis=-1), (h, w, d_bins))


def _bin_point_voxels(h, w, cam, spec, d_bins, near, far):
    """Linear voxel index and validity for every (feature pixel, bin) pair.

    Returns (vox_lin, in_grid), both (h * w * d_bins,), pixel-major then
    bin. Pure geometry: no gradients flow through this.
    """
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    u = (jj.ravel() + 0.5) * FEATURE_STRIDE
    v = (ii.ravel() + 0.5) * FEATURE_STRIDE
    rays = np.stack(
        [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones(h * w)], axis=1
    )
    centers = depth_bin_centers(d_bins, near, far)
    pts_cam = rays[:, None, :] * centers[None, :, None]  # (hw, B, 3)
    ext = cam.extrinsic
    pts_ego = (pts_cam.reshape(-1, 3) - ext[:3, 3]) @ ext[:3, :3]
    vox = np.floor((pts_ego - np.asarray(spec.origin)) / spec.resolution).astype(np.int64)
    d, hh, ww = spec.dims
    ix, iy, iz = vox[:, 0], vox[:, 1], vox[:, 2]
    in_grid = (
        (ix >= 0) & (ix < ww) & (iy >= 0) & (iy < hh) & (iz >= 0) & (iz < d)
    )
    vox_lin = np.where(in_grid, (iz * hh + iy) * ww + ix, 0)
    return vox_lin, in_grid


def lift_to_voxels(
    feat: Tensor,
    dist: Tensor,
    cam,
    spec,
    near: float = DEFAULT_NEAR,
    far: float = 20.0,
) -> Tensor:
    """Splat one view's features into a (D, H, W, C) voxel grid.

    feat: (h, w, C); dist: (h, w, d_bins) per-pixel bin probabilities.
    Contributions land in the voxel containing the bin-center point along
    each feature pixel's camera ray; collisions sum.
    """
    h, w, c = feat.data.shape
    hd, wd, d_bins = dist.data.shape
    if (h, w) != (hd, wd):
        raise ValueError(
            f"feature grid {h}x{w} does not align with distribution {hd}x{wd}"
        )
    vox_lin, in_grid = _bin_point_voxels(h, w, cam, spec, d_bins, near, far)
    entry = np.nonzero(in_grid)[0]
    d, hh, ww = spec.dims
    n_vox = d * hh * ww
    if entry.size == 0:
        return Tensor(np.zeros((d, hh, ww, c), np.float32))
    rows = dm.gather_rows(dm.reshape(feat, (h * w, c)), entry // d_bins)
    probs = dm.gather_rows(dm.reshape(dist, (h * w * d_bins, 1)), entry)
    grid = dm.scatter_add_nc(vox_lin[entry], dm.mul(rows, probs), n_vox)
    return dm.reshape(grid, (d, hh, ww, c))


def lift_multi_view(
    feats: list[Tensor],
    dists: list[Tensor],
    calib,
    spec,
    near: float = DEFAULT_NEAR,
    far: float = 20.0,
) -> Tensor:
    """Sum of per-view lifts, accumulated in fixed view order."""
    if len(feats) != len(calib) or len(dists) != len(calib):
        raise ValueError("one feature map and one distribution per camera required")
    total = None
    for feat, dist, cam in zip(feats, dists, calib):
        lifted = lift_to_voxels(feat, dist, cam, spec, near=near, far=far)
        total = lifted if total is None else dm.add(total, lifted)
    return total
