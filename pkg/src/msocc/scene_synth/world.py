"""Procedural semantic voxel worlds.

A world is a dense label grid over a :class:`~msocc.geometry.VoxelGridSpec`,
one uint8 class id per voxel.  Class 0 is always free space; ids 1..C-1 are
semantic classes; 255 is reserved for "void / unlabelled" and is never
produced by the generator (it exists so downstream consumers can mark voxels
they want excluded from losses and metrics).

The generator builds a small outdoor-like scene: a ground layer at z=0,
box-shaped vehicles, thin vertical poles, pedestrian-sized columns, walls,
and ragged vegetation blobs.  Everything is a pure function of
``(seed, spec, class_count)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import VoxelGridSpec

# Class ids, in the order the generator paints them.  Poles and pedestrians
# are deliberately similar shapes (thin vertical columns) so that telling
# them apart genuinely requires appearance cues; their palette colors are
# far apart.
CLASS_FREE = 0
CLASS_GROUND = 1
CLASS_VEHICLE = 2
CLASS_POLE = 3
CLASS_PEDESTRIAN = 4
CLASS_WALL = 5
CLASS_VEGETATION = 6

CLASS_NAMES = (
    "free",
    "ground",
    "vehicle",
    "pole",
    "pedestrian",
    "wall",
    "vegetation",
)

#: RGB color per class id.  Index 0 (free space) never appears in a render;
#: it gets a dark placeholder so palette lookups stay total.
DEFAULT_PALETTE = np.array(
    [
        [20, 20, 20],      # free (placeholder, never rendered)
        [105, 105, 105],   # ground: asphalt gray
        [200, 40, 40],     # vehicle: red
        [230, 220, 50],    # pole: yellow
        [60, 130, 220],    # pedestrian: blue
        [150, 100, 60],    # wall: brown
        [60, 170, 70],     # vegetation: green
    ],
    dtype=np.uint8,
)

#: Background color for pixels whose ray leaves the grid without a hit.
SKY_COLOR = np.array([135, 206, 235], dtype=np.uint8)

#: Label used in rendered class maps for sky pixels, and legal in stored
#: grids for "unlabelled"; it is excluded from every loss and metric.
VOID_LABEL = 255

_MIN_DIMS = (8, 16, 16)  # (D, H, W)


@dataclass(frozen=True)
class SemanticWorld:
    """A dense semantic voxel grid plus the spec that places it in space.

    grid holds one uint8 class id per voxel in (D, H, W) = (z, y, x) order.
    Labels must be < class_count, except the reserved void value 255.
    """

    grid: np.ndarray
    spec: VoxelGridSpec
    class_count: int = 7
    palette: np.ndarray = field(default_factory=lambda: DEFAULT_PALETTE.copy())

    def __post_init__(self) -> None:
        if self.grid.dtype != np.uint8:
            raise ValueError(f"grid dtype must be uint8, got {self.grid.dtype}")
        if self.grid.shape != self.spec.dims:
            raise ValueError(
                f"grid shape {self.grid.shape} does not match spec dims {self.spec.dims}"
            )
        if not (2 <= self.class_count <= 255):
            raise ValueError(f"class_count must be in [2, 255], got {self.class_count}")
        bad = (self.grid >= self.class_count) & (self.grid != VOID_LABEL)
        if bad.any():
            worst = int(self.grid[bad][0])
            raise ValueError(
                f"grid contains label {worst} >= class_count {self.class_count}"
            )
        if self.palette.shape != (self.class_count, 3) or self.palette.dtype != np.uint8:
            raise ValueError(
                f"palette must be uint8 with shape ({self.class_count}, 3), "
                f"got {self.palette.dtype} {self.palette.shape}"
            )

    @property
    def occupancy_fraction(self) -> float:
        """Fraction of voxels that are neither free nor void."""
        occ = (self.grid != CLASS_FREE) & (self.grid != VOID_LABEL)
        return float(occ.mean())


def _place_box(
    grid: np.ndarray,
    rng: np.random.Generator,
    size_z: tuple[int, int],
    size_y: tuple[int, int],
    size_x: tuple[int, int],
    label: int,
) -> None:
    """Paint one axis-aligned box with its base resting on the ground layer."""
    D, H, W = grid.shape
    dz = int(rng.integers(size_z[0], size_z[1] + 1))
    dy = int(rng.integers(size_y[0], size_y[1] + 1))
    dx = int(rng.integers(size_x[0], size_x[1] + 1))
    if rng.random() < 0.5:
        dy, dx = dx, dy  # random axis-aligned orientation
    dz = min(dz, D - 1)
    dy = min(dy, H)
    dx = min(dx, W)
    y0 = int(rng.integers(0, H - dy + 1))
    x0 = int(rng.integers(0, W - dx + 1))
    grid[1 : 1 + dz, y0 : y0 + dy, x0 : x0 + dx] = label


def _place_blob(grid: np.ndarray, rng: np.random.Generator, label: int) -> None:
    """Paint one ragged ellipsoid (vegetation) clipped to z >= 1."""
    D, H, W = grid.shape
    rz = float(rng.uniform(1.5, min(4.0, D / 3)))
    ry = float(rng.uniform(2.0, 5.0))
    rx = float(rng.uniform(2.0, 5.0))
    cz = float(rng.uniform(1 + rz * 0.5, min(D - 1, 1 + rz * 1.5)))
    cy = float(rng.uniform(0, H - 1))
    cx = float(rng.uniform(0, W - 1))
    zz, yy, xx = np.meshgrid(
        np.arange(D), np.arange(H), np.arange(W), indexing="ij"
    )
    dist = ((zz - cz) / rz) ** 2 + ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
    inside = (dist <= 1.0) & (zz >= 1)
    # Ragged edges: drop a fixed fraction of boundary voxels.
    ragged = rng.random(grid.shape) < 0.85
    grid[inside & (ragged | (dist <= 0.5))] = label


def generate_world(
    seed: int, spec: VoxelGridSpec, class_count: int = 7
) -> SemanticWorld:
    """Generate a deterministic semantic scene on the given grid.

    The scene always has a complete ground layer at z=0.  Objects rest on
    the ground (they start at z=1), and a small column at the grid center is
    kept clear so sensors can be placed there.  Object categories whose
    class id is >= class_count are skipped, which lets callers generate
    reduced-vocabulary worlds.

    Raises ValueError if the grid is smaller than (8, 16, 16) in (D, H, W):
    below that there is no room for the object shapes.
    """
    D, H, W = spec.dims
    if D < _MIN_DIMS[0] or H < _MIN_DIMS[1] or W < _MIN_DIMS[2]:
        raise ValueError(
            f"grid dims {spec.dims} too small for scene generation; "
            f"need at least {_MIN_DIMS} in (D, H, W)"
        )
    if not (2 <= class_count <= 255):
        raise ValueError(f"class_count must be in [2, 255], got {class_count}")

    rng = np.random.default_rng(seed)
    grid = np.zeros(spec.dims, dtype=np.uint8)

    # Ground layer first; everything else paints over or above it.
    grid[0, :, :] = CLASS_GROUND

    scale = (H * W) / (64.0 * 64.0)  # object counts scale with ground area

    if CLASS_VEHICLE < class_count:
        n = int(rng.integers(3, 8) * max(scale, 0.25)) or 1
        for _ in range(n):
            _place_box(grid, rng, (4, 7), (5, 10), (3, 6), CLASS_VEHICLE)

    if CLASS_WALL < class_count:
        n = max(1, int(rng.integers(1, 4) * max(scale, 0.25)))
        for _ in range(n):
            _place_box(grid, rng, (5, 9), (12, 30), (1, 2), CLASS_WALL)

    if CLASS_VEGETATION < class_count:
        n = int(rng.integers(2, 6) * max(scale, 0.25)) or 1
        for _ in range(n):
            _place_blob(grid, rng, CLASS_VEGETATION)

    if CLASS_POLE < class_count:
        n = int(rng.integers(2, 7) * max(scale, 0.25)) or 1
        for _ in range(n):
            _place_box(grid, rng, (8, min(14, D - 1)), (1, 1), (1, 1), CLASS_POLE)

    if CLASS_PEDESTRIAN < class_count:
        n = int(rng.integers(2, 7) * max(scale, 0.25)) or 1
        for _ in range(n):
            _place_box(grid, rng, (7, 9), (1, 2), (1, 2), CLASS_PEDESTRIAN)

    # Clear an ego column at the center so sensors never spawn inside
    # geometry.  The ground layer underneath stays.
    cy, cx = H // 2, W // 2
    grid[1:, cy - 1 : cy + 2, cx - 1 : cx + 2] = CLASS_FREE

    palette = DEFAULT_PALETTE[:class_count].copy()
    if class_count > DEFAULT_PALETTE.shape[0]:
        extra_rng = np.random.default_rng(7)
        extra = extra_rng.integers(
            0, 256, size=(class_count - DEFAULT_PALETTE.shape[0], 3), dtype=np.uint8
        )
        palette = np.concatenate([palette, extra], axis=0)

    return SemanticWorld(grid=grid, spec=spec, class_count=class_count, palette=palette)
