"""Simulated sensors: a spinning range scanner and a surround camera rig.

Both sensors observe a :class:`SemanticWorld` by ray casting against its
label grid, so their outputs are mutually consistent by construction: a
lidar return sits strictly inside the voxel it hit, and a camera looking at
that voxel renders its class color at the corresponding pixel (up to pixel
quantization at object silhouettes, and occlusion from the camera's side).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._kernels import raycast as _kernel_raycast
from ..geometry import CalibrationSet, CameraModel, VoxelGridSpec, compose_extrinsic
from .rays import cast_rays
from .world import SKY_COLOR, VOID_LABEL, SemanticWorld

#: Depth at which rendered surface colors have fully faded to the minimum
#: shade factor; gives images visible depth cues without extra channels.
SHADE_RANGE_M = 16.0
SHADE_FLOOR = 0.3

#: Lidar points are pushed this far (meters) past the voxel entry face so
#: they sit strictly inside the voxel they report.
HIT_INSET_M = 1e-3


@dataclass(frozen=True)
class PointCloud:
    """Lidar returns in ego coordinates with per-point range in meters."""

    points: np.ndarray  # (N, 3) float32 xyz
    ranges: np.ndarray  # (N,) float32

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {self.points.shape}")
        if self.ranges.shape != (self.points.shape[0],):
            raise ValueError(
                f"ranges shape {self.ranges.shape} does not match "
                f"{self.points.shape[0]} points"
            )
        if self.points.dtype != np.float32 or self.ranges.dtype != np.float32:
            raise ValueError("points and ranges must be float32")
        if self.ranges.size and not (self.ranges > 0).all():
            raise ValueError("all ranges must be positive")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class MultiViewImageSet:
    """One rendered RGB image per camera, plus per-pixel class and depth.

    class_maps use 255 for sky (no surface along the pixel ray), matching
    the void convention; depth_maps hold the entry-face distance in meters,
    +inf for sky.
    """

    images: tuple[np.ndarray, ...]
    class_maps: tuple[np.ndarray, ...]
    depth_maps: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not (len(self.images) == len(self.class_maps) == len(self.depth_maps)):
            raise ValueError("images, class_maps, depth_maps must have equal length")
        for img, cmap, dmap in zip(self.images, self.class_maps, self.depth_maps):
            if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
                raise ValueError(f"each image must be (H, W, 3) uint8, got {img.shape}")
            if cmap.shape != img.shape[:2] or dmap.shape != img.shape[:2]:
                raise ValueError("class/depth map shape must match its image")

    def __len__(self) -> int:
        return len(self.images)


@dataclass(frozen=True)
class BeamPattern:
    """Scanner beam layout: an elevation x azimuth grid of unit rays."""

    elevations: np.ndarray  # (n_el,) radians, signed, 0 = horizontal
    azimuths: np.ndarray  # (n_az,) radians, counterclockwise from +x

    def directions(self) -> np.ndarray:
        """All beam directions as (n_el * n_az, 3) unit xyz, elevation-major."""
        el = self.elevations[:, None]
        az = self.azimuths[None, :]
        ce = np.cos(el)
        dirs = np.stack(
            [
                np.broadcast_to(ce * np.cos(az), (el.size, az.size)),
                np.broadcast_to(ce * np.sin(az), (el.size, az.size)),
                np.broadcast_to(np.sin(el) * np.ones_like(az), (el.size, az.size)),
            ],
            axis=-1,
        )
        return np.ascontiguousarray(dirs.reshape(-1, 3))


def make_beam_pattern(
    n_elevation: int = 32,
    n_azimuth: int = 512,
    elevation_span: tuple[float, float] = (math.radians(-35.0), math.radians(15.0)),
) -> BeamPattern:
    """Evenly spaced beams: n_elevation rows over the span, full azimuth circle."""
    if n_elevation < 1 or n_azimuth < 1:
        raise ValueError("beam pattern needs at least one elevation and azimuth")
    el = np.linspace(elevation_span[0], elevation_span[1], n_elevation)
    az = np.linspace(0.0, 2.0 * math.pi, n_azimuth, endpoint=False)
    return BeamPattern(elevations=el, azimuths=az)


def default_sensor_origin(spec: VoxelGridSpec) -> np.ndarray:
    """Sensor mount point: near the grid center in xy, about 1.6 m up.

    The nominal point is snapped to the center of the voxel containing it,
    so the sensor never sits exactly on a voxel boundary plane; on-plane
    origins make diagonal beams cross voxel corners exactly, which produces
    degenerate grazing hits.
    """
    ox, oy, oz = spec.origin
    ex = spec.dims[2] * spec.resolution
    ey = spec.dims[1] * spec.resolution
    ez = spec.dims[0] * spec.resolution
    nominal = np.array(
        [ox + ex / 2.0, oy + ey / 2.0, oz + min(1.6, ez / 2.0)], np.float64
    )
    lo = np.array([ox, oy, oz], np.float64)
    cell = np.floor((nominal - lo) / spec.resolution)
    cell = np.minimum(cell, np.array(spec.dims[::-1], np.float64) - 1.0)
    return lo + (cell + 0.5) * spec.resolution


def raycast_lidar(
    world: SemanticWorld,
    origin: np.ndarray | None = None,
    pattern: BeamPattern | None = None,
    max_range: float = 20.0,
    noise_sigma: float = 0.02,
    seed: int = 0,
) -> PointCloud:
    """Scan the world and return one point per beam that hits a surface.

    Each hit point lies on the beam, just past the entry face of the first
    occupied voxel, with Gaussian range noise (sigma = noise_sigma meters)
    clamped so the point never leaves that voxel.  Beams that exit the grid
    or exceed max_range produce no return.  The sensor origin must lie
    inside the grid bounds.
    """
    spec = world.spec
    if origin is None:
        origin = default_sensor_origin(spec)
    origin = np.asarray(origin, np.float64)
    if pattern is None:
        pattern = make_beam_pattern()

    lo = np.asarray(spec.origin, np.float64)
    hi = lo + np.array(spec.dims[::-1], np.float64) * spec.resolution
    if np.any(origin < lo) or np.any(origin >= hi):
        raise ValueError(
            f"sensor origin {origin.tolist()} lies outside grid bounds "
            f"[{lo.tolist()}, {hi.tolist()})"
        )

    dirs = pattern.directions()
    t, vox, _ = _kernel_raycast(
        world.grid, origin, dirs, lo, spec.resolution, max_range
    )
    # A return whose inset point would land past the range cap is dropped,
    # the same as a beam that never came back.
    hit = (t >= 0) & (t + HIT_INSET_M <= max_range)
    t = t[hit]
    vox = vox[hit]
    d = dirs[hit]

    # Exit distance of each hit voxel, to bound the noise.
    vmin = lo[None, :] + vox[:, ::-1].astype(np.float64) * spec.resolution
    safe_d = np.where(d != 0, d, 1.0)
    t_exit_axis = np.where(
        d > 0,
        (vmin + spec.resolution - origin[None, :]) / safe_d,
        np.where(d < 0, (vmin - origin[None, :]) / safe_d, np.inf),
    )
    t_exit = t_exit_axis.min(axis=1)

    t_lo = t + HIT_INSET_M
    t_hi = np.minimum(t_exit - HIT_INSET_M, max_range)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma, size=t.shape)
    t_pt = np.clip(t_lo + noise, t_lo, t_hi)
    # A beam that only grazes a voxel corner or edge has no room for the
    # insets; such a pulse returns next to no energy, so drop it.
    solid = t_hi >= t_lo
    t_pt = t_pt[solid]
    d = d[solid]

    points = (origin[None, :] + t_pt[:, None] * d).astype(np.float32)
    ranges = t_pt.astype(np.float32)
    return PointCloud(points=points, ranges=ranges)


def make_surround_rig(
    spec: VoxelGridSpec,
    fov_deg: float = 100.0,
    width: int = 128,
    height: int = 96,
    mount: np.ndarray | None = None,
) -> CalibrationSet:
    """Four cameras at the sensor mount, 90 degrees apart, looking level.

    Forward axes are +x, +y, -x, -y in ego coordinates (front, left, back,
    right).  The horizontal field of view fixes the focal length; pixels are
    square.
    """
    if mount is None:
        mount = default_sensor_origin(spec)
    mount = np.asarray(mount, np.float64)
    fx = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    down = np.array([0.0, 0.0, -1.0])
    cams = []
    for forward in (
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
        np.array([-1.0, 0.0, 0.0]),
        np.array([0.0, -1.0, 0.0]),
    ):
        cam_y = down
        cam_x = np.cross(cam_y, forward)
        R = np.stack([cam_x, cam_y, forward], axis=0)
        tvec = -R @ mount
        cams.append(
            CameraModel(
                fx=fx,
                fy=fx,
                cx=width / 2.0,
                cy=height / 2.0,
                extrinsic=compose_extrinsic(R, tvec),
                width=width,
                height=height,
            )
        )
    return CalibrationSet(cameras=tuple(cams))


def camera_position(cam: CameraModel) -> np.ndarray:
    """Camera center in ego coordinates, from its ego-to-camera extrinsic."""
    R = cam.extrinsic[:3, :3]
    tvec = cam.extrinsic[:3, 3]
    return -R.T @ tvec


def pixel_ray_directions(cam: CameraModel) -> np.ndarray:
    """Unit ego-frame ray directions through every pixel center, (H*W, 3)."""
    u = (np.arange(cam.width, dtype=np.float64) + 0.5 - cam.cx) / cam.fx
    v = (np.arange(cam.height, dtype=np.float64) + 0.5 - cam.cy) / cam.fy
    uu, vv = np.meshgrid(u, v)  # (H, W)
    d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1).reshape(-1, 3)
    d_cam /= np.linalg.norm(d_cam, axis=1, keepdims=True)
    R = cam.extrinsic[:3, :3]
    return d_cam @ R  # row-vector form of R.T @ d


def shade_factor(depth: np.ndarray) -> np.ndarray:
    """Depth-based brightness multiplier in [SHADE_FLOOR, 1]."""
    return np.maximum(SHADE_FLOOR, 1.0 - np.asarray(depth, np.float64) / SHADE_RANGE_M)


def render_views(world: SemanticWorld, calib: CalibrationSet) -> MultiViewImageSet:
    """Render the label grid from every camera in the rig.

    Each pixel's ray (through the pixel center) is marched to the first
    occupied voxel; the pixel takes that voxel's palette color scaled by
    shade_factor of the hit depth.  Rays that leave the grid are sky.
    """
    spec = world.spec
    lo = np.asarray(spec.origin, np.float64)
    extent = np.array(spec.dims[::-1], np.float64) * spec.resolution
    corners = lo[None, :] + extent[None, :] * (
        ((np.arange(8)[:, None] >> np.arange(3)[None, :]) & 1).astype(np.float64)
    )

    images = []
    class_maps = []
    depth_maps = []
    for cam in calib:
        pos = camera_position(cam)
        t_max = float(np.linalg.norm(corners - pos[None, :], axis=1).max()) + 1.0
        dirs = pixel_ray_directions(cam)
        t, _, cls = cast_rays(world.grid, pos, dirs, lo, spec.resolution, t_max)
        hit = t >= 0

        shade = shade_factor(np.where(hit, t, 0.0))
        rgb = np.rint(world.palette[cls].astype(np.float64) * shade[:, None])
        img = np.where(hit[:, None], rgb, SKY_COLOR[None, :].astype(np.float64))
        images.append(
            img.astype(np.uint8).reshape(cam.height, cam.width, 3)
        )
        cmap = np.where(hit, cls, np.uint8(VOID_LABEL)).astype(np.uint8)
        class_maps.append(cmap.reshape(cam.height, cam.width))
        dmap = np.where(hit, t, np.inf).astype(np.float32)
        depth_maps.append(dmap.reshape(cam.height, cam.width))

    return MultiViewImageSet(
        images=tuple(images),
        class_maps=tuple(class_maps),
        depth_maps=tuple(depth_maps),
    )
