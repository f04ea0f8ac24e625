"""Late-stage dual-modality voxel fusion and occupancy decoding."""

from .decoder import decode_occupancy
from .fusion import (
    HCCVF_MODES,
    ConfidenceField,
    adaptive_fuse,
    confidence_heads,
    hccvf_fuse,
    scatter_replace,
    topk_select,
)

__all__ = [
    "HCCVF_MODES",
    "ConfidenceField",
    "adaptive_fuse",
    "confidence_heads",
    "decode_occupancy",
    "hccvf_fuse",
    "scatter_replace",
    "topk_select",
]
