"""Debug dump of depth maps as 16-bit PGM, millimeter units.

Binary PGM stores 16-bit samples most-significant byte first; depths are
rounded to whole millimeters and clipped to the uint16 range, which covers
65.5 m, far beyond any desk-scale range.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .depth import DepthMap


def save_depth_pgm(path: str | Path, dmap: DepthMap) -> None:
    """Write a depth map as a 16-bit binary PGM in millimeters."""
    mm = np.rint(dmap.values * 1000.0)
    mm = np.clip(mm, 0, 65535).astype(">u2")
    H, W = mm.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{W} {H}\n65535\n".encode("ascii"))
        f.write(mm.tobytes())


def load_depth_pgm(path: str | Path) -> DepthMap:
    """Read a 16-bit binary PGM written by save_depth_pgm, back to meters."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {raw[:2]!r})")
    fields = []
    i = 2
    while len(fields) < 3:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(int(raw[i:j]))
        i = j
    i += 1
    W, H, maxval = fields
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
    expected = i + H * W * 2
    if len(raw) < expected:
        raise ValueError(f"{path}: file is {len(raw)} bytes, expected {expected}")
    mm = np.frombuffer(raw, dtype=">u2", count=H * W, offset=i).reshape(H, W)
    return DepthMap(values=mm.astype(np.float64) / 1000.0)
