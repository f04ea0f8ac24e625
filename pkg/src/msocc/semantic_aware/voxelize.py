"""Point-cloud voxelization into dense features plus an occupied-voxel set."""

from dataclasses import dataclass

import numpy as np

from .. import diffmath as dm
from ..diffmath import ParameterStore, Tensor


@dataclass(frozen=True)
class SparseVoxelSet:
    """Occupied voxel locations with one feature row per location.

    locations: (N, 3) int32 (z, y, x), unique; features: (N, C) Tensor
    aligned row for row.
    """

    locations: np.ndarray
    features: Tensor

    def __post_init__(self) -> None:
        locs = np.asarray(self.locations, np.int32)
        if locs.ndim != 2 or locs.shape[1] != 3:
            raise ValueError(f"locations must be (N, 3), got {locs.shape}")
        if self.features.data.ndim != 2 or self.features.data.shape[0] != locs.shape[0]:
            raise ValueError(
                f"features {self.features.data.shape} do not match {locs.shape[0]} locations"
            )
        if locs.shape[0] and np.unique(locs, axis=0).shape[0] != locs.shape[0]:
            raise ValueError("locations contain duplicates")
        object.__setattr__(self, "locations", locs)

    def __len__(self) -> int:
        return self.locations.shape[0]

    def linear_indices(self, spec) -> np.ndarray:
        d, h, w = spec.dims
        z, y, x = self.locations[:, 0], self.locations[:, 1], self.locations[:, 2]
        return (z.astype(np.int64) * h + y) * w + x


def voxelize_lidar(
    store: ParameterStore,
    cloud,
    spec,
    channels: int = 32,
    max_range: float = 20.0,
) -> tuple[Tensor, SparseVoxelSet]:
    """Pool per-point descriptors into occupied-voxel features.

    Each in-grid point contributes (offset from its voxel center, range)
    through a shared 2-layer MLP; outputs are mean-pooled per voxel.
    Returns the dense (D, H, W, C) grid (zero where unoccupied) and the
    occupied set. Points are processed in a canonical sorted order so the
    result is invariant to input permutation, bitwise.
    """
    d, h, w = spec.dims
    n_vox = d * h * w
    pts = cloud.points.astype(np.float64)
    origin = np.asarray(spec.origin)
    vox = np.floor((pts - origin) / spec.resolution).astype(np.int64)
    ok = (
        (vox[:, 0] >= 0) & (vox[:, 0] < w)
        & (vox[:, 1] >= 0) & (vox[:, 1] < h)
        & (vox[:, 2] >= 0) & (vox[:, 2] < d)
    )
    pts, vox = pts[ok], vox[ok]
    rng = cloud.ranges.astype(np.float64)[ok]

    if pts.shape[0] == 0:
        empty = SparseVoxelSet(
            locations=np.zeros((0, 3), np.int32),
            features=Tensor(np.zeros((0, channels), np.float32)),
        )
        return Tensor(np.zeros((d, h, w, channels), np.float32)), empty

    centers = origin + (vox + 0.5) * spec.resolution
    off = (pts - centers) / (spec.resolution / 2.0)
    desc = np.concatenate([off, (rng / max_range)[:, None]], axis=1)
    lin = (vox[:, 2] * h + vox[:, 1]) * w + vox[:, 0]

    order = np.lexsort((desc[:, 3], desc[:, 2], desc[:, 1], desc[:, 0], lin))
    desc, lin = desc[order], lin[order]
    uniq, inverse, counts = np.unique(lin, return_inverse=True, return_counts=True)

    w1 = store.param("vox.w1", (4, channels))
    w2 = store.param("vox.w2", (channels, channels))
    per_point = dm.matmul(dm.relu(dm.matmul(Tensor(desc.astype(np.float32)), w1)), w2)
    summed = dm.scatter_add_nc(inverse, per_point, uniq.size)
    pooled = dm.mul(summed, (1.0 / counts)[:, None].astype(np.float32))

    grid = dm.reshape(dm.scatter_add_nc(uniq, pooled, n_vox), (d, h, w, channels))
    z, rem = np.divmod(uniq, h * w)
    y, x = np.divmod(rem, w)
    locs = np.stack([z, y, x], axis=1).astype(np.int32)
    return grid, SparseVoxelSet(locations=locs, features=pooled)
