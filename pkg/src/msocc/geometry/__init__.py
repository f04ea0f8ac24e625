"""View geometry: cameras, projection, and voxel-grid indexing."""

from .calibration import load_calibration, save_calibration
from .core import (
    CalibrationSet,
    CameraModel,
    VoxelGridSpec,
    compose_extrinsic,
    project_point,
    project_points,
    visible_views,
    voxel_center,
    voxel_centers,
    voxel_index,
    voxel_indices,
)

__all__ = [
    "CalibrationSet",
    "CameraModel",
    "VoxelGridSpec",
    "compose_extrinsic",
    "load_calibration",
    "project_point",
    "project_points",
    "save_calibration",
    "visible_views",
    "voxel_center",
    "voxel_centers",
    "voxel_index",
    "voxel_indices",
]
