# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Splat candidate enumeration, compiled with FMA contraction disabled.

The depth renderer is specified down to the bit: d2 must be exactly
dx*dx + dy*dy in float64 (two roundings, then the add). This translation
unit is built with -ffp-contract=off so the compiler cannot fuse that into
an FMA; keep anything rounding-sensitive here and nothing else.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def splat_candidates(double[::1] xs, double[::1] ys, double[::1] us,
                     int H, int W, double radius,
                     long[::1] pix, double[::1] d2, double[::1] u):
    """Fill pix/d2/u with pixels within `radius` of each splat; returns count.

    Output buffers must hold at least len(xs) * (2*ceil(radius)+1)**2 entries.
    Matches _npk.splat_candidates up to candidate order; the d2 bit patterns
    are identical.
    """
    cdef Py_ssize_t n = xs.shape[0]
    cdef int r = <int> np.ceil(radius)
    cdef double r2 = radius * radius
    cdef Py_ssize_t i, m
    cdef int qx, qy, x0, y0
    cdef double px, py, dx, dy, dd
    m = 0
    for i in range(n):
        px = xs[i]; py = ys[i]
        x0 = <int> px
        if x0 > px: x0 -= 1
        y0 = <int> py
        if y0 > py: y0 -= 1
        for qy in range(y0 - r, y0 + r + 1):
            if qy < 0 or qy >= H:
                continue
            dy = qy - py
            for qx in range(x0 - r, x0 + r + 1):
                if qx < 0 or qx >= W:
                    continue
                dx = qx - px
                dd = dx * dx + dy * dy
                if dd <= r2:
                    pix[m] = qy * W + qx
                    d2[m] = dd
                    u[m] = us[i]
                    m += 1
    return m
