"""Enrich occupied voxels with image semantics via deformable attention.

Occupied voxel centers are projected into every camera; voxels seen by at
least one view gather image features (bilinear average across hit views,
added to the voxel feature), then query a small deformable-attention
block per hit view. The per-view results are consolidated with an
elementwise max and scattered back into the dense grid, touching only
occupied rows.
"""

import numpy as np

from .. import diffmath as dm
from ..diffmath import ParameterStore, Tensor
from ..geometry import project_points, voxel_centers
from ..view_lift import FEATURE_STRIDE
from .voxelize import SparseVoxelSet

DEFAULT_N_HEAD = 2
DEFAULT_N_KEY = 4


def canonical_view_order(calib):
    """Order view indices by camera parameters, not list position.

    Float sums depend on accumulation order, so averaging image features
    in list order would make the result depend on how the caller happened
    to arrange the rig. Sorting views by their intrinsics and extrinsics
    pins one accumulation order per rig regardless of list order. Two
    cameras with identical parameters keep their relative list order.
    """
    def key(i):
        cam = calib[i]
        return (cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height) + tuple(
            np.asarray(cam.extrinsic, np.float64).ravel()
        )

    return sorted(range(len(calib)), key=key)


def voxel_feature_coords(locations, cam, spec):
    """Project voxel centers into one view's scale-0 feature map.

    Returns (pts, hit): pts (N, 2) float64 in feature-map pixel units
    (only meaningful where hit), hit (N,) bool marking centers that land
    inside the image with positive depth.
    """
    centers = voxel_centers(locations, spec)
    uv, _, hit = project_points(centers, cam)
    return uv / FEATURE_STRIDE - 0.5, hit


def gather_and_add(
    store: ParameterStore, occ: SparseVoxelSet, fmaps, calib, spec
) -> SparseVoxelSet:
    """Add projected image features to each occupied voxel's feature.

    Per voxel, the scale-0 feature maps of all hit views are bilinearly
    sampled at the projected center and averaged; a 1x1 projection maps
    them to the voxel channel width before the elementwise addition.
    Voxels with no hit view are unchanged.
    """
    n = len(occ)
    if n == 0:
        return occ
    c_img = fmaps[0].data.shape[2]
    c_vox = occ.features.data.shape[1]
    acc = Tensor(np.zeros((n, c_img), np.float32))
    counts = np.zeros(n, np.int64)
    for v in canonical_view_order(calib):
        fmap, cam = fmaps[v], calib[v]
        pts, hit = voxel_feature_coords(occ.locations, cam, spec)
        idx = np.nonzero(hit)[0]
        if idx.size == 0:
            continue
        sampled = dm.bilinear_many(fmap, Tensor(pts[idx].astype(np.float32)))
        acc = dm.add(acc, dm.scatter_add_nc(idx, sampled, n))
        counts[idx] += 1
    mean = dm.mul(acc, (1.0 / np.maximum(counts, 1))[:, None].astype(np.float32))
    proj = store.param("sem.add.proj", (c_img, c_vox))
    feats = dm.add(occ.features, dm.matmul(mean, proj))
    return SparseVoxelSet(locations=occ.locations, features=feats)


def deformable_attend(
    store: ParameterStore,
    queries: Tensor,
    refs: np.ndarray,
    value_map: Tensor,
    n_head: int = DEFAULT_N_HEAD,
    n_key: int = DEFAULT_N_KEY,
    prefix: str = "sem.da",
) -> Tensor:
    """Deformable attention: sample learned offsets around each reference.

    queries: (N, C); refs: (N, 2) feature-map coords; value_map (h, w, C_img).
    Per head, n_key offset locations are predicted from the query, sampled
    bilinearly, softmax-weighted, value-projected to C/n_head, and mapped
    back to C by the head's output projection; heads sum. Offset and
    weight heads are zero-initialized, so an untrained block samples the
    reference point with uniform weights.
    """
    n, c = queries.data.shape
    if c % n_head:
        raise ValueError(f"channels {c} not divisible by {n_head} heads")
    dh = c // n_head
    c_img = value_map.data.shape[2]
    hk = n_head * n_key

    w_off = store.param(f"{prefix}.off", (c, hk * 2), init="zeros")
    w_attn = store.param(f"{prefix}.attn", (c, hk), init="zeros")
    offsets = dm.reshape(dm.matmul(queries, w_off), (n * hk, 2))
    pos = dm.add(Tensor(np.repeat(refs, hk, axis=0).astype(np.float32)), offsets)
    weights = dm.softmax(dm.reshape(dm.matmul(queries, w_attn), (n * n_head, n_key)), axis=-1)

    sampled = dm.bilinear_many(value_map, pos)
    weighted = dm.mul(sampled, dm.reshape(weights, (n * hk, 1)))

    out = None
    base = np.arange(n)[:, None] * hk
    for a in range(n_head):
        idx_a = (base + a * n_key + np.arange(n_key)).ravel()
        head_sum = dm.sum_(
            dm.reshape(dm.gather_rows(weighted, idx_a), (n, n_key, c_img)), axis=1
        )
        w_val = store.param(f"{prefix}.val{a}", (c_img, dh))
        w_out = store.param(f"{prefix}.out{a}", (dh, c))
        term = dm.matmul(dm.matmul(head_sum, w_val), w_out)
        out = term if out is None else dm.add(out, term)
    return out


def maxpool_hit_views(fallback: Tensor, per_view) -> Tensor:
    """Elementwise max over per-view feature rows, fallback where no view hit.

    fallback: (N, C); per_view: list of (row indices, (M, C) Tensor).
    Rows covered by at least one view take the max over covering views;
    the rest keep their fallback row bitwise.
    """
    n, c = fallback.data.shape
    floor = np.full((n, c), -np.inf, np.float32)
    acc = None
    hit = np.zeros(n, bool)
    for idx, rows in per_view:
        if len(idx) == 0:
            continue
        full = dm.scatter_replace_rows(Tensor(floor.copy()), idx, rows)
        acc = full if acc is None else dm.maximum(acc, full)
        hit[idx] = True
    hit_idx = np.nonzero(hit)[0]
    if hit_idx.size == 0:
        return fallback
    return dm.scatter_replace_rows(fallback, hit_idx, dm.gather_rows(acc, hit_idx))


def semantic_update(
    store: ParameterStore,
    f_l: Tensor,
    occ: SparseVoxelSet,
    fmaps,
    calib,
    spec,
    n_head: int = DEFAULT_N_HEAD,
    n_key: int = DEFAULT_N_KEY,
) -> Tensor:
    """Rewrite occupied rows of the lidar grid with image-aware features.

    Runs gather_and_add, then per hit view deformable attention queried by
    the enriched voxel features, max-pools across views, and scatters the
    result into a copy of f_l. Unoccupied voxels are untouched, bitwise.
    """
    d, h, w = spec.dims
    c = f_l.data.shape[3]
    if len(occ) == 0:
        return f_l
    enriched = gather_and_add(store, occ, fmaps, calib, spec)
    per_view = []
    for v in canonical_view_order(calib):
        fmap, cam = fmaps[v], calib[v]
        pts, hit = voxel_feature_coords(occ.locations, cam, spec)
        idx = np.nonzero(hit)[0]
        if idx.size == 0:
            continue
        queries = dm.gather_rows(enriched.features, idx)
        rows = deformable_attend(
            store, queries, pts[idx], fmap, n_head=n_head, n_key=n_key
        )
        per_view.append((idx, rows))
    sem = maxpool_hit_views(enriched.features, per_view)
    flat = dm.scatter_replace_rows(
        dm.reshape(f_l, (d * h * w, c)), occ.linear_indices(spec), sem
    )
    return dm.reshape(flat, (d, h, w, c))
