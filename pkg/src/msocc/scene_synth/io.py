"""On-disk formats for scenes: point clouds, label grids, images.

All three formats are little-endian, fixed-layout, and round-trip their
payload bit for bit:

* point cloud: magic ``MSPC``, uint32 count, then count xyz triples as
  float32.  Ranges are not stored; the loader recomputes them from the
  sensor origin, which lives in the dataset config.
* label grid: magic ``MSOG``, uint32 D, H, W, uint8 class count, then
  D*H*W label bytes with z varying slowest (C order of a (D, H, W) array).
* image: binary PPM (P6), maxval 255.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .sensors import PointCloud

_PC_MAGIC = b"MSPC"
_GRID_MAGIC = b"MSOG"


def save_pointcloud(path: str | Path, cloud: PointCloud) -> None:
    """Write a point cloud's xyz coordinates."""
    pts = np.ascontiguousarray(cloud.points, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_PC_MAGIC)
        f.write(struct.pack("<I", pts.shape[0]))
        f.write(pts.tobytes())


def load_pointcloud(path: str | Path, sensor_origin: np.ndarray) -> PointCloud:
    """Read a point cloud, recomputing ranges from the sensor origin."""
    raw = Path(path).read_bytes()
    if raw[:4] != _PC_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {_PC_MAGIC!r}")
    (count,) = struct.unpack_from("<I", raw, 4)
    expected = 8 + count * 12
    if len(raw) != expected:
        raise ValueError(f"{path}: file is {len(raw)} bytes, expected {expected}")
    pts = np.frombuffer(raw, dtype="<f4", count=count * 3, offset=8)
    pts = pts.reshape(count, 3).astype(np.float32)
    origin = np.asarray(sensor_origin, np.float64)
    ranges = np.linalg.norm(pts.astype(np.float64) - origin[None, :], axis=1)
    return PointCloud(points=pts, ranges=ranges.astype(np.float32))


def save_label_grid(path: str | Path, grid: np.ndarray, class_count: int) -> None:
    """Write a (D, H, W) uint8 label grid."""
    if grid.ndim != 3 or grid.dtype != np.uint8:
        raise ValueError(f"grid must be 3-d uint8, got {grid.dtype} {grid.shape}")
    if not (2 <= class_count <= 255):
        raise ValueError(f"class_count must be in [2, 255], got {class_count}")
    D, H, W = grid.shape
    with open(path, "wb") as f:
        f.write(_GRID_MAGIC)
        f.write(struct.pack("<IIIB", D, H, W, class_count))
        f.write(np.ascontiguousarray(grid).tobytes())


def load_label_grid(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a label grid; returns (grid, class_count)."""
    raw = Path(path).read_bytes()
    if raw[:4] != _GRID_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {_GRID_MAGIC!r}")
    D, H, W, class_count = struct.unpack_from("<IIIB", raw, 4)
    expected = 17 + D * H * W
    if len(raw) != expected:
        raise ValueError(f"{path}: file is {len(raw)} bytes, expected {expected}")
    grid = np.frombuffer(raw, dtype=np.uint8, count=D * H * W, offset=17)
    return grid.reshape(D, H, W).copy(), class_count


def save_ppm(path: str | Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 image as binary PPM."""
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(f"image must be (H, W, 3) uint8, got {image.dtype} {image.shape}")
    H, W = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{W} {H}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(image).tobytes())


def load_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM with maxval 255."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P6":
        raise ValueError(f"{path}: not a binary PPM (magic {raw[:2]!r})")
    # Header: three whitespace-separated fields after the magic, then one
    # whitespace byte, then the pixel payload.
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
            raise ValueError(f"{path}: truncated PPM header")
        fields.append(int(raw[i:j]))
        i = j
    i += 1  # single whitespace after maxval
    W, H, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    expected = i + H * W * 3
    if len(raw) < expected:
        raise ValueError(f"{path}: file is {len(raw)} bytes, expected {expected}")
    img = np.frombuffer(raw, dtype=np.uint8, count=H * W * 3, offset=i)
    return img.reshape(H, W, 3).copy()
