"""Pure-numpy reference kernels.

Mirrors the compiled kernels in _fastk/_exactk one for one; the dispatcher in
__init__ picks whichever backend is importable. Everything here must be
deterministic: scatter ops go through np.ufunc.at (unbuffered, sequential in
index order) and sorts are stable with pinned tie rules.

Array layout conventions shared by both backends:
  * voxel grids are (D, H, W, C) float32, flattened spatially to (D*H*W, C)
  * images and feature maps are (H, W, C) float32
  * points are (N, 2) float32 as (x, y) map coordinates, integer-aligned
    (a point exactly on an integer lattice site reads that site's value)
"""

import numpy as np

BACKEND = "numpy"


# ---------------------------------------------------------------------------
# 3x3x3 convolution, channels last, zero padding, stride 1


def conv3d_fwd(xp, w3, D, H, W):
    """Forward conv on a pre-padded input.

    xp: (D+2, H+2, W+2, Cin) float32, zero padded by one voxel on each face.
    w3: (27, Cin, Cout) float32, tap-major (z, y, x).
    Returns (out, cache): out is (D*H*W, Cout); cache holds the im2col matrix
    so the weight gradient can reuse it (the compiled backend returns None).
    """
    Cin = xp.shape[3]
    cols = np.empty((D, H, W, 27, Cin), np.float32)
    t = 0
    for dz in range(3):
        for dy in range(3):
            for dx in range(3):
                cols[:, :, :, t, :] = xp[dz : dz + D, dy : dy + H, dx : dx + W, :]
                t += 1
    c2 = cols.reshape(D * H * W, 27 * Cin)
    out = c2 @ w3.reshape(27 * Cin, -1)
    return out, c2


def conv3d_dw(xp, cache, dy, D, H, W, Cin):
    """Weight gradient. dy: (D*H*W, Cout) -> (27, Cin, Cout)."""
    if cache is None:
        _, cache = conv3d_fwd(xp, np.zeros((27, Cin, 0), np.float32), D, H, W)
    dw = cache.T @ dy
    return np.ascontiguousarray(dw.reshape(27, Cin, -1))


# ---------------------------------------------------------------------------
# Voxel grid raycasting (amanatides-woo traversal)


def raycast(labels, origin, dirs, grid_min, res, t_max):
    """March rays through a label grid until the first non-free voxel.

    labels: (D, H, W) uint8, 0 = free. origin: (3,) world xyz. dirs: (N, 3)
    unit directions. grid_min: (3,) world xyz of the grid corner. Returns
    (t, vox, cls): t is the entry-face distance (-1.0 for a miss), vox the
    hit voxel as (z, y, x) int32, cls its label.
    """
    D, H, W = labels.shape
    n = dirs.shape[0]
    t = np.full(n, -1.0, np.float64)
    vox = np.full((n, 3), -1, np.int32)
    cls = np.zeros(n, np.uint8)

    g = (np.asarray(origin, np.float64) - np.asarray(grid_min, np.float64)) / res
    dims = np.array([W, H, D], np.float64)  # x, y, z order
    if np.any(g < 0) or np.any(g >= dims):
        raise ValueError("ray origin must lie inside the grid")

    d = np.asarray(dirs, np.float64)
    cur = np.empty((n, 3), np.int64)  # x, y, z
    cur[:] = np.floor(g).astype(np.int64)
    step = np.where(d > 0, 1, np.where(d < 0, -1, 0)).astype(np.int64)
    with np.errstate(divide="ignore"):
        tdel = np.where(d != 0, res / np.abs(d), np.inf)
        nxt = np.where(step > 0, cur + 1, cur).astype(np.float64)
        tmax = np.where(d != 0, (nxt - g) * res / d, np.inf)

    # Immediate hit if the origin voxel itself is occupied.
    lab0 = labels[cur[:, 2], cur[:, 1], cur[:, 0]]
    hit0 = lab0 != 0
    t[hit0] = 0.0
    vox[hit0] = cur[hit0][:, ::-1]
    cls[hit0] = lab0[hit0]

    active = np.where(~hit0)[0]
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
        hi = rows[hit]
        t[hi] = t_entry[hit]
        vox[hi] = c[hit][:, ::-1]
        cls[hi] = lab[hit]
        active = rows[alive & (lab == 0)]
    return t, vox, cls


# ---------------------------------------------------------------------------
# Bilinear sampling with zero padding


def bilinear_gather(fmap, pts):
    """Sample (H, W, C) at (N, 2) xy points; out-of-bounds corners read 0."""
    H, W, C = fmap.shape
    x = pts[:, 0].astype(np.float32)
    y = pts[:, 1].astype(np.float32)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    out = np.zeros((pts.shape[0], C), np.float32)
    flat = fmap.reshape(H * W, C)
    for cx, cy, w in (
        (x0, y0, (1 - fx) * (1 - fy)),
        (x0 + 1, y0, fx * (1 - fy)),
        (x0, y0 + 1, (1 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ):
        ok = (cx >= 0) & (cx < W) & (cy >= 0) & (cy < H)
        idx = np.where(ok, cy * W + cx, 0)
        out += np.where(ok[:, None], flat[idx] * w[:, None], 0.0).astype(np.float32)
    return out


def bilinear_bwd(fmap, pts, dout, dmap, dpts):
    """Accumulate gradients for bilinear_gather into dmap and dpts."""
    H, W, C = fmap.shape
    x = pts[:, 0].astype(np.float32)
    y = pts[:, 1].astype(np.float32)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    flat = fmap.reshape(H * W, C)
    dflat = dmap.reshape(H * W, C)
    vals = []
    for cx, cy, w in (
        (x0, y0, (1 - fx) * (1 - fy)),
        (x0 + 1, y0, fx * (1 - fy)),
        (x0, y0 + 1, (1 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ):
        ok = (cx >= 0) & (cx < W) & (cy >= 0) & (cy < H)
        idx = np.where(ok, cy * W + cx, 0)
        contrib = dout * w[:, None]
        np.add.at(dflat, idx[ok], contrib[ok])
        vals.append(np.where(ok[:, None], flat[idx], 0.0))
    v00, v10, v01, v11 = vals
    gx = ((v10 - v00) * (1 - fy)[:, None] + (v11 - v01) * fy[:, None]) * dout
    gy = ((v01 - v00) * (1 - fx)[:, None] + (v11 - v10) * fx[:, None]) * dout
    dpts[:, 0] += gx.sum(axis=1).astype(np.float32)
    dpts[:, 1] += gy.sum(axis=1).astype(np.float32)


# ---------------------------------------------------------------------------
# Scatter primitives


def scatter_add_rows(idx, vals, out):
    """out[idx[m]] += vals[m], sequential in m."""
    np.add.at(out, idx, vals)


def scatter_min(idx, vals, out):
    """out[idx[m]] = min(out[idx[m]], vals[m])."""
    np.minimum.at(out, idx, vals)


# ---------------------------------------------------------------------------
# Gaussian splat candidate enumeration

# The caller applies exp through numpy and min-scatters the resulting terms;
# only the candidate set and the float64 d2 values are produced here, and
# their bit patterns are part of the renderer's contract.


def splat_candidates(xs, ys, us, H, W, radius):
    """Pixels within `radius` of each splat centre.

    xs, ys, us: (B,) float64 centre coordinates and depths. Returns
    (pix, d2, u): flat pixel indices (int64), squared distances (float64)
    computed as dx*dx + dy*dy, and the splat depth repeated per candidate.
    Candidate order is unspecified; the consumer's min-reduction is exact.
    """
    r = int(np.ceil(radius))
    span = np.arange(-r, r + 1, dtype=np.int64)
    cx = np.floor(xs).astype(np.int64)[:, None] + span[None, :]  # (B, 2r+1)
    cy = np.floor(ys).astype(np.int64)[:, None] + span[None, :]
    dx = cx.astype(np.float64) - xs[:, None]
    dy = cy.astype(np.float64) - ys[:, None]
    d2 = dx[:, None, :] * dx[:, None, :] + dy[:, :, None] * dy[:, :, None]
    ok = (
        (d2 <= radius * radius)
        & (cx[:, None, :] >= 0) & (cx[:, None, :] < W)
        & (cy[:, :, None] >= 0) & (cy[:, :, None] < H)
    )
    pix = cy[:, :, None] * W + cx[:, None, :]
    pix = np.broadcast_to(pix, d2.shape)[ok]
    uu = np.broadcast_to(us[:, None, None], d2.shape)[ok]
    return pix, d2[ok], uu


# ---------------------------------------------------------------------------
# Sorting


def argsort_desc(x):
    """Indices sorting x descending; ties keep ascending index order."""
    return np.argsort(-x, kind="stable")
