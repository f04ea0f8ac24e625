"""Depth priors from lidar: splatting points into per-view depth maps.

Each in-view lidar point becomes a truncated Gaussian kernel on the image
plane, carrying its camera-frame depth attenuated by the kernel weight.
Where kernels overlap, a pixel takes the minimum attenuated depth, which
keeps foreground surfaces in front; pixels no kernel covers read 0, meaning
"no prior".

Pixel (row i, col j) samples the image plane at (u, v) = (j + 0.5, i + 0.5),
the same convention the renderer's pixel rays use.  The candidate search
works on half-shifted centers so the distance arithmetic is the plain
``dx*dx + dy*dy`` both here and in the brute-force oracle the tests compare
against; the comparison is exact, so the expression form matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._kernels import scatter_min, splat_candidates
from ..geometry import CameraModel, project_points
from ..scene_synth import PointCloud


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth prior in meters; 0 encodes "no prior"."""

    values: np.ndarray  # (H, W) float64

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"depth map must be 2-d, got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("depth map contains non-finite values")
        if (self.values < 0).any():
            raise ValueError("depth map contains negative values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def splat_points(
    cloud: PointCloud, cam: CameraModel
) -> tuple[np.ndarray, np.ndarray]:
    """Project a point cloud into one camera.

    Returns (pix, depth): the continuous (u, v) image positions, (N, 2)
    float64, and the camera-frame depths in meters, for the points that
    land inside the image with positive depth.
    """
    uv, depth, valid = project_points(cloud.points.astype(np.float64), cam)
    return uv[valid], depth[valid]


def attenuated_depths(d2: np.ndarray, depth: np.ndarray, sigma: float) -> np.ndarray:
    """Kernel terms: depth scaled by a Gaussian of the squared pixel distance.

    Shared by the renderer and its brute-force test oracle so both apply
    bit-identical arithmetic.
    """
    return depth * np.exp(-d2 / (2.0 * sigma * sigma))


def truncation_radius(sigma: float) -> float:
    """Kernel support radius in pixels."""
    return float(math.ceil(3.0 * sigma))


def render_gaussian_depth(
    splats: tuple[np.ndarray, np.ndarray],
    sigma: float,
    height: int,
    width: int,
) -> DepthMap:
    """Rasterize splats into a depth map by min over covering kernels.

    A pixel is covered by a splat when its sample point lies within
    truncation_radius(sigma) of the splat center; its value is the minimum
    attenuated depth over covering splats, or 0 when none cover it.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pix, depth = splats
    pix = np.asarray(pix, np.float64)
    depth = np.asarray(depth, np.float64)
    radius = truncation_radius(sigma)

    # Candidate pixels are enumerated on the integer lattice of centers
    # shifted by half a pixel, so dx = lattice - (u - 0.5) measures the
    # distance from the splat to the pixel's (col + 0.5, row + 0.5) sample
    # point.
    flat = np.full(height * width, np.inf, np.float64)
    if pix.shape[0]:
        pidx, d2, u = splat_candidates(
            pix[:, 0] - 0.5, pix[:, 1] - 0.5, depth, height, width, radius
        )
        scatter_min(pidx, attenuated_depths(d2, u, sigma), flat)
    flat[np.isinf(flat)] = 0.0
    return DepthMap(values=flat.reshape(height, width))
