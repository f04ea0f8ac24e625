"""Synthetic scene generation and sensor simulation.

Builds small semantic voxel worlds and observes them with a simulated
spinning range scanner and a surround camera rig, producing the point
clouds, label grids, and images the rest of the package trains on.
"""

from .io import (
    load_label_grid,
    load_pointcloud,
    load_ppm,
    save_label_grid,
    save_pointcloud,
    save_ppm,
)
from .rays import cast_rays
from .sensors import (
    HIT_INSET_M,
    BeamPattern,
    MultiViewImageSet,
    PointCloud,
    camera_position,
    default_sensor_origin,
    make_beam_pattern,
    make_surround_rig,
    pixel_ray_directions,
    raycast_lidar,
    render_views,
    shade_factor,
)
from .world import (
    CLASS_NAMES,
    DEFAULT_PALETTE,
    SKY_COLOR,
    VOID_LABEL,
    SemanticWorld,
    generate_world,
)

__all__ = [
    "BeamPattern",
    "CLASS_NAMES",
    "DEFAULT_PALETTE",
    "HIT_INSET_M",
    "MultiViewImageSet",
    "PointCloud",
    "SKY_COLOR",
    "SemanticWorld",
    "VOID_LABEL",
    "camera_position",
    "cast_rays",
    "default_sensor_origin",
    "generate_world",
    "load_label_grid",
    "load_pointcloud",
    "load_ppm",
    "make_beam_pattern",
    "make_surround_rig",
    "pixel_ray_directions",
    "raycast_lidar",
    "render_views",
    "save_label_grid",
    "save_pointcloud",
    "save_ppm",
    "shade_factor",
]
