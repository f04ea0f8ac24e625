"""Semantic enrichment of occupied lidar voxels from multi-view images."""

from .attention import (
    DEFAULT_N_HEAD,
    canonical_view_order,
    DEFAULT_N_KEY,
    deformable_attend,
    gather_and_add,
    maxpool_hit_views,
    semantic_update,
    voxel_feature_coords,
)
from .voxelize import SparseVoxelSet, voxelize_lidar

__all__ = [
    "DEFAULT_N_HEAD",
    "canonical_view_order",
    "DEFAULT_N_KEY",
    "SparseVoxelSet",
    "deformable_attend",
    "gather_and_add",
    "maxpool_hit_views",
    "semantic_update",
    "voxel_feature_coords",
    "voxelize_lidar",
]
