"""Grid ray casting with arbitrary (per-ray) origins.

The kernel backends provide a fast single-origin caster that requires the
origin to sit inside the grid; that covers the lidar, which by contract is
mounted inside the scene.  Cameras have no such restriction, so rendering
uses this numpy traversal instead: each ray is first clipped to the grid box
(slab test) and then marched voxel by voxel from its entry point.  Rendering
happens once per scene, so the speed difference does not matter.
"""

from __future__ import annotations

import numpy as np


def cast_rays(
    labels: np.ndarray,
    origins: np.ndarray,
    dirs: np.ndarray,
    grid_min: np.ndarray,
    res: float,
    t_max: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """March rays until the first non-free voxel, from anywhere.

    labels: (D, H, W) uint8, 0 = free.  origins: (N, 3) or (3,) world xyz.
    dirs: (N, 3) unit directions.  grid_min: world xyz of the grid corner.
    Returns (t, vox, cls): t is the distance to the hit voxel's entry face
    (-1.0 for a miss), vox the hit voxel as (z, y, x) int32, cls its label.
    For a ray starting inside an occupied voxel the entry distance is 0; for
    one starting outside the grid it is the distance to the box entry.
    """
    D, H, W = labels.shape
    d = np.asarray(dirs, np.float64)
    n = d.shape[0]
    o = np.asarray(origins, np.float64)
    if o.ndim == 1:
        o = np.broadcast_to(o, (n, 3))

    lo = np.asarray(grid_min, np.float64)
    dims_xyz = np.array([W, H, D], np.float64)
    hi = lo + dims_xyz * res

    t = np.full(n, -1.0, np.float64)
    vox = np.full((n, 3), -1, np.int32)
    cls = np.zeros(n, np.uint8)

    # Clip each ray to the grid box.  Axes with zero direction either keep
    # the ray inside forever or rule it out immediately.
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo[None, :] - o) / d
        tb = (hi[None, :] - o) / d
    t_near = np.minimum(ta, tb)
    t_far = np.maximum(ta, tb)
    flat = d == 0
    inside_axis = (o >= lo[None, :]) & (o < hi[None, :])
    t_near = np.where(flat, np.where(inside_axis, -np.inf, np.inf), t_near)
    t_far = np.where(flat, np.where(inside_axis, np.inf, -np.inf), t_far)
    t0 = np.maximum(t_near.max(axis=1), 0.0)
    t1 = t_far.min(axis=1)
    ok = (t0 <= t1) & (t0 <= t_max) & np.isfinite(t0)

    g = (o - lo[None, :]) / res  # origin in voxel units, possibly outside
    t_start = np.where(ok, t0, 0.0)  # keep the arithmetic finite for misses
    start = g + ((t_start[:, None] + 1e-9) / res) * d
    cur = np.floor(start).astype(np.int64)
    in_grid = (
        ok
        & (cur[:, 0] >= 0) & (cur[:, 0] < W)
        & (cur[:, 1] >= 0) & (cur[:, 1] < H)
        & (cur[:, 2] >= 0) & (cur[:, 2] < D)
    )

    step = np.where(d > 0, 1, np.where(d < 0, -1, 0)).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tdel = np.where(d != 0, res / np.abs(d), np.inf)
        nxt = np.where(step > 0, cur + 1, cur).astype(np.float64)
        # Absolute distance (from the true origin) at which each ray crosses
        # into the next voxel along each axis.
        tmax = np.where(d != 0, (nxt - g) * res / d, np.inf)

    idx = np.where(in_grid)[0]
    lab0 = np.zeros(n, np.uint8)
    lab0[idx] = labels[cur[idx, 2], cur[idx, 1], cur[idx, 0]]
    hit0 = in_grid & (lab0 != 0)
    t[hit0] = t0[hit0]
    vox[hit0] = cur[hit0][:, ::-1]
    cls[hit0] = lab0[hit0]

    active = np.where(in_grid & (lab0 == 0))[0]
    max_steps = D + H + W + 3
    for _ in range(max_steps):
        if active.size == 0:
            break
        ax = np.argmin(tmax[active], axis=1)
        rows = active
        t_entry = tmax[rows, ax]
        cur[rows, ax] += step[rows, ax]
        tmax[rows, ax] += tdel[rows, ax]

        c = cur[rows]
        oob = (
            (c[:, 0] < 0) | (c[:, 0] >= W)
            | (c[:, 1] < 0) | (c[:, 1] >= H)
            | (c[:, 2] < 0) | (c[:, 2] >= D)
            | (t_entry > t_max)
        )
        alive = ~oob
        lab = np.zeros(rows.size, np.uint8)
        ai = np.where(alive)[0]
        lab[ai] = labels[c[ai, 2], c[ai, 1], c[ai, 0]]
        hit = alive & (lab != 0)
        hi_rows = rows[hit]
        t[hi_rows] = t_entry[hit]
        vox[hi_rows] = c[hit][:, ::-1]
        cls[hi_rows] = lab[hit]
        active = rows[alive & (lab == 0)]
    return t, vox, cls
