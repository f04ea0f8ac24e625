"""Multi-stage LiDAR-camera fusion for desk-scale 3D semantic occupancy."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
