"""Differentiable gather/scatter ops: bilinear sampling and voxel updates."""

import numpy as np

from .. import _kernels as K
from .tensor import Tensor, _out, transpose


def bilinear_many(fmap, pts):
    """Sample (H, W, C) at (N, 2) xy points, zero padded outside.

    Differentiable in both the map values and the points.
    """
    pd = np.ascontiguousarray(pts.data, np.float32)
    fd = np.ascontiguousarray(fmap.data, np.float32)
    data = K.bilinear_gather(fd, pd)

    def bwd(t):
        def run():
            dmap = np.zeros_like(fd)
            dpts = np.zeros_like(pd)
            K.bilinear_bwd(fd, pd, np.ascontiguousarray(t.grad, np.float32),
                           dmap, dpts)
            if fmap.requires_grad:
                fmap.accum(dmap)
            if pts.requires_grad:
                pts.accum(dpts)
        return run

    return _out(data, (fmap, pts), "bilinear", bwd)


def bilinear_sample(fmap_chw, p):
    """Single-point convenience over a (C, H, W) map; returns (C,)."""
    hwc = transpose(fmap_chw, (1, 2, 0))
    pt = p if isinstance(p, Tensor) else Tensor(np.asarray(p, np.float32))
    out = bilinear_many(hwc, pt.reshape(1, 2))
    return out.reshape(out.data.shape[1])


def scatter_add_nc(idx, vals, n_rows):
    """Rows scattered by index into a fresh (n_rows, C) accumulator."""
    idx = np.ascontiguousarray(idx, np.int64)
    C = vals.data.shape[1]
    data = np.zeros((n_rows, C), np.float32)
    K.scatter_add_rows(idx, np.ascontiguousarray(vals.data), data)

    def bwd(t):
        def run():
            vals.accum(np.ascontiguousarray(t.grad[idx]))
        return run

    return _out(data, (vals,), "scatter_add", bwd)


def scatter_replace_rows(base, idx, rows):
    """Copy of `base` with base[idx] = rows; idx entries must be unique."""
    idx = np.ascontiguousarray(idx, np.int64)
    data = base.data.copy()
    data[idx] = rows.data

    def bwd(t):
        def run():
            if rows.requires_grad:
                rows.accum(t.grad[idx])
            if base.requires_grad:
                g = t.grad.copy()
                g[idx] = 0.0
                base.accum(g)
        return run

    return _out(data, (base, rows), "scatter_replace", bwd)
