"""Depth-aware image features from lidar priors.

Splats lidar points into per-view Gaussian depth maps, encodes them, and
fuses them with image backbone features, yielding the 2D feature pyramids
the view-lifting stage consumes.
"""

from .depth import (
    DepthMap,
    attenuated_depths,
    render_gaussian_depth,
    splat_points,
    truncation_radius,
)
from .encoder import (
    FeatureMapPyramid,
    depth_aware_features,
    encode_depth,
    fuse_depth_image,
    image_backbone,
)
from .io import load_depth_pgm, save_depth_pgm

__all__ = [
    "DepthMap",
    "FeatureMapPyramid",
    "attenuated_depths",
    "depth_aware_features",
    "encode_depth",
    "fuse_depth_image",
    "image_backbone",
    "load_depth_pgm",
    "render_gaussian_depth",
    "save_depth_pgm",
    "splat_points",
    "truncation_radius",
]
