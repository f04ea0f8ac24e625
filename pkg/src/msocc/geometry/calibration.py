"""Plain-text calibration files: one camera per blank-line-separated block.

Each block carries exactly the keys fx, fy, cx, cy, width, height, and
extrinsic (12 floats, the top three rows of the 4x4 transform, row-major).
Unknown or missing keys are errors; the bottom row is implied (0 0 0 1).
"""

import numpy as np

from .core import CalibrationSet, CameraModel

_SCALAR_KEYS = ("fx", "fy", "cx", "cy")
_INT_KEYS = ("width", "height")


def _parse_block(lines, blockno):
    seen = {}
    for line in lines:
        parts = line.split()
        key, vals = parts[0], parts[1:]
        if key in seen:
            raise ValueError(f"camera block {blockno}: duplicate key '{key}'")
        if key in _SCALAR_KEYS:
            if len(vals) != 1:
                raise ValueError(f"camera block {blockno}: '{key}' takes one value")
            seen[key] = float(vals[0])
        elif key in _INT_KEYS:
            if len(vals) != 1:
                raise ValueError(f"camera block {blockno}: '{key}' takes one value")
            seen[key] = int(vals[0])
        elif key == "extrinsic":
            if len(vals) != 12:
                raise ValueError(
                    f"camera block {blockno}: extrinsic needs 12 values, got {len(vals)}")
            seen[key] = [float(v) for v in vals]
        else:
            raise ValueError(f"camera block {blockno}: unknown key '{key}'")
    missing = [k for k in (*_SCALAR_KEYS, *_INT_KEYS, "extrinsic") if k not in seen]
    if missing:
        raise ValueError(f"camera block {blockno}: missing keys {missing}")
    ext = np.eye(4)
    ext[:3, :] = np.asarray(seen["extrinsic"]).reshape(3, 4)
    return CameraModel(fx=seen["fx"], fy=seen["fy"], cx=seen["cx"], cy=seen["cy"],
                       extrinsic=ext, width=seen["width"], height=seen["height"])


def load_calibration(path):
    """Parse a calibration file into a CalibrationSet."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    blocks, current = [], []
    for line in raw.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if not stripped:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(stripped)
    if current:
        blocks.append(current)
    if not blocks:
        raise ValueError(f"{path}: no camera blocks found")
    cams = [_parse_block(lines, i) for i, lines in enumerate(blocks)]
    return CalibrationSet(cameras=tuple(cams))


def save_calibration(calib, path):
    """Write a CalibrationSet in the format load_calibration reads."""
    chunks = []
    for cam in calib:
        ext = " ".join(repr(float(v)) for v in cam.extrinsic[:3, :].ravel())
        chunks.append(
            f"fx {cam.fx!r}\nfy {cam.fy!r}\ncx {cam.cx!r}\ncy {cam.cy!r}\n"
            f"width {cam.width}\nheight {cam.height}\nextrinsic {ext}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(chunks))
