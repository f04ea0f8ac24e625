"""Camera models, voxel-grid indexing, and point projection.

Conventions used everywhere downstream:
  * ego-frame points are (x, y, z) in meters
  * voxel indices are (z, y, x) to match the D,H,W feature layout
  * camera frame is +z forward, +x right, +y down; extrinsics map ego
    to camera coordinates
  * intervals are half-open: a point exactly on the max corner of the
    grid (or a projection exactly on the right/bottom image edge) is out
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with a rigid ego-to-camera transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    extrinsic: np.ndarray  # 4x4, rows 0..2 = camera axes in ego coords
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1 pixel")
        ext = np.asarray(self.extrinsic, dtype=np.float64)
        if ext.shape != (4, 4):
            raise ValueError(f"extrinsic must be 4x4, got {ext.shape}")
        r = ext[:3, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-6:
            raise ValueError("extrinsic rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError("extrinsic rotation block must have determinant +1")
        object.__setattr__(self, "extrinsic", ext)


@dataclass(frozen=True)
class CalibrationSet:
    """Ordered cameras; list position is the view index used everywhere."""

    cameras: tuple

    def __post_init__(self):
        cams = tuple(self.cameras)
        if not cams:
            raise ValueError("a calibration set needs at least one camera")
        object.__setattr__(self, "cameras", cams)

    def __len__(self):
        return len(self.cameras)

    def __iter__(self):
        return iter(self.cameras)

    def __getitem__(self, j):
        return self.cameras[j]


@dataclass(frozen=True)
class VoxelGridSpec:
    """Axis-aligned voxel lattice: min corner, isotropic resolution, counts.

    dims is (D, H, W) = voxel counts along ego (z, y, x).
    """

    origin: tuple  # ego meters (x, y, z) of the min corner
    resolution: float
    dims: tuple  # (D, H, W)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("voxel resolution must be positive")
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError(f"grid dims must be three counts >= 1, got {self.dims}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def max_corner(self):
        d, h, w = self.dims
        ox, oy, oz = self.origin
        r = self.resolution
        return (ox + w * r, oy + h * r, oz + d * r)


def compose_extrinsic(rotation, translation):
    """Build a 4x4 ego-to-camera transform from R (3x3) and t (3,)."""
    ext = np.eye(4)
    ext[:3, :3] = np.asarray(rotation, dtype=np.float64)
    ext[:3, 3] = np.asarray(translation, dtype=np.float64)
    return ext


def project_point(p, cam):
    """Project one ego point; None when behind the camera or off-image.

    Returns (u, v, depth) with continuous pixel coordinates and the
    camera-frame depth in meters.
    """
    p = np.asarray(p, dtype=np.float64)
    pc = cam.extrinsic[:3, :3] @ p + cam.extrinsic[:3, 3]
    z = pc[2]
    if z <= 0.0:
        return None
    u = cam.fx * pc[0] / z + cam.cx
    v = cam.fy * pc[1] / z + cam.cy
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        return None
    return (float(u), float(v), float(z))


def project_points(pts, cam):
    """Vectorized projection of an (N, 3) array of ego points.

    Returns (uv, depth, valid): uv is (N, 2) float64, depth (N,), valid
    (N,) bool. uv/depth rows are meaningful only where valid is set.
    """
    pts = np.asarray(pts, dtype=np.float64)
    pc = pts @ cam.extrinsic[:3, :3].T + cam.extrinsic[:3, 3]
    z = pc[:, 2]
    front = z > 0.0
    zs = np.where(front, z, 1.0)  # avoid divide warnings on culled rows
    u = cam.fx * pc[:, 0] / zs + cam.cx
    v = cam.fy * pc[:, 1] / zs + cam.cy
    valid = front & (u >= 0.0) & (u < cam.width) & (v >= 0.0) & (v < cam.height)
    return np.stack([u, v], axis=1), z, valid


def voxel_index(p, spec):
    """Ego point to integer (z, y, x) voxel index, or None when outside."""
    p = np.asarray(p, dtype=np.float64)
    rel = (p - np.asarray(spec.origin)) / spec.resolution
    ix, iy, iz = np.floor(rel).astype(np.int64)
    d, h, w = spec.dims
    if 0 <= iz < d and 0 <= iy < h and 0 <= ix < w:
        return (int(iz), int(iy), int(ix))
    return None


def voxel_indices(pts, spec):
    """Vectorized (N, 3) ego points -> ((N, 3) int32 zyx indices, valid)."""
    pts = np.asarray(pts, dtype=np.float64)
    rel = (pts - np.asarray(spec.origin)) / spec.resolution
    idx_xyz = np.floor(rel).astype(np.int32)
    d, h, w = spec.dims
    lim = np.array([w, h, d], np.int32)
    valid = ((idx_xyz >= 0) & (idx_xyz < lim)).all(axis=1)
    return idx_xyz[:, ::-1].copy(), valid


def voxel_center(idx, spec):
    """Center of voxel (z, y, x) as an ego-frame (x, y, z) point."""
    iz, iy, ix = idx
    d, h, w = spec.dims
    if not (0 <= iz < d and 0 <= iy < h and 0 <= ix < w):
        raise IndexError(f"voxel index {idx} outside grid dims {spec.dims}")
    r = spec.resolution
    ox, oy, oz = spec.origin
    return (ox + (ix + 0.5) * r, oy + (iy + 0.5) * r, oz + (iz + 0.5) * r)


def voxel_centers(idx, spec):
    """Vectorized (N, 3) int zyx indices -> (N, 3) float64 xyz centers."""
    idx = np.asarray(idx)
    out = (idx[:, ::-1].astype(np.float64) + 0.5) * spec.resolution
    return out + np.asarray(spec.origin)


def visible_views(p, calib):
    """Indices of the views whose image contains the projection of p."""
    return {j for j, cam in enumerate(calib) if project_point(p, cam) is not None}
