"""Depth-distribution lifting of image features into voxel space."""

from .lift import (
    DEFAULT_D_BINS,
    DEFAULT_NEAR,
    FEATURE_STRIDE,
    depth_bin_centers,
    depth_bin_index,
    lift_multi_view,
    lift_to_voxels,
    predict_depth_distribution,
)

__all__ = [
    "DEFAULT_D_BINS",
    "DEFAULT_NEAR",
    "FEATURE_STRIDE",
    "depth_bin_centers",
    "depth_bin_index",
    "lift_multi_view",
    "lift_to_voxels",
    "predict_depth_distribution",
]
