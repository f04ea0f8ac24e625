# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: conv taps, raycasting, bilinear sampling, scatters, sort.

Semantics match msocc._kernels._npk exactly; see that module for the layout
conventions. Accumulation order inside the conv kernels differs from the
numpy im2col path, so conv results agree to rounding, not bitwise. Scatter
and sort results are identical.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from libc.string cimport memset

cnp.import_array()

BACKEND = "cython"

# The inner channel loops run over literal blocks of 8 so the C compiler can
# vectorize them; Cout that is not a multiple of 8 falls back to a scalar tail.


cdef inline void _fma_row(const float* xrow, const float* wrow, float* acc,
                          int Cin, int Cout, int nb) noexcept nogil:
    cdef int ci, cb, j, co, base
    cdef float xv
    cdef const float* wp
    for ci in range(Cin):
        xv = xrow[ci]
        wp = wrow + ci * Cout
        for cb in range(nb):
            base = cb * 8
            for j in range(8):
                acc[base + j] = acc[base + j] + xv * wp[base + j]
        for co in range(nb * 8, Cout):
            acc[co] = acc[co] + xv * wp[co]


cdef inline float _dot_row(const float* xrow, const float* wcol,
                           int Cin, int mb) noexcept nogil:
    # Cout == 1 path: 8 running partials over ci, summed at the end.
    cdef float part[8]
    cdef int ci, cb, j, base
    cdef float s
    for j in range(8):
        part[j] = 0.0
    for cb in range(mb):
        base = cb * 8
        for j in range(8):
            part[j] = part[j] + xrow[base + j] * wcol[base + j]
    s = 0.0
    for ci in range(mb * 8, Cin):
        s += xrow[ci] * wcol[ci]
    for j in range(8):
        s += part[j]
    return s


cdef inline void _conv_w4_c8(const float* xp, const float* w3, float* orow,
                             int w, int Cin, long sy, long sz) noexcept nogil:
    # Four consecutive outputs at once, Cout == 8: one weight vector load
    # feeds four FMAs, which is what keeps this off the load ports.
    cdef float a0[8]
    cdef float a1[8]
    cdef float a2[8]
    cdef float a3[8]
    cdef int dz, dy, dx, ci, j
    cdef float x0, x1, x2, x3
    cdef const float* xr
    cdef const float* wp
    for j in range(8):
        a0[j] = 0.0; a1[j] = 0.0; a2[j] = 0.0; a3[j] = 0.0
    wp = w3
    for dz in range(3):
        for dy in range(3):
            for dx in range(3):
                xr = xp + dz * sz + dy * sy + (w + dx) * Cin
                for ci in range(Cin):
                    x0 = xr[ci]
                    x1 = xr[Cin + ci]
                    x2 = xr[2 * Cin + ci]
                    x3 = xr[3 * Cin + ci]
                    for j in range(8):
                        a0[j] = a0[j] + x0 * wp[ci * 8 + j]
                        a1[j] = a1[j] + x1 * wp[ci * 8 + j]
                        a2[j] = a2[j] + x2 * wp[ci * 8 + j]
                        a3[j] = a3[j] + x3 * wp[ci * 8 + j]
                wp += Cin * 8
    for j in range(8):
        orow[j] = a0[j]
        orow[8 + j] = a1[j]
        orow[16 + j] = a2[j]
        orow[24 + j] = a3[j]


def conv3d_fwd(float[:, :, :, ::1] xp, float[:, :, ::1] w3, int D, int H, int W):
    """Direct 3x3x3 conv on a pre-padded (D+2, H+2, W+2, Cin) input."""
    cdef int Cin = xp.shape[3]
    cdef int Cout = w3.shape[2]
    if Cout > 128:
        raise ValueError("conv3d_fwd: Cout exceeds compiled limit")
    out_arr = np.empty((D * H * W, Cout), np.float32)
    cdef float[:, ::1] out = out_arr
    cdef float acc[128]
    cdef int nb = Cout >> 3
    cdef int mb = Cin >> 3
    cdef int d, h, w, dz, dy, dx, tap, co, n, w4
    cdef float s
    cdef const float* wrow
    cdef float* orow
    cdef long sy = (<long> (W + 2)) * Cin
    cdef long sz = (<long> (H + 2)) * sy
    n = 0
    with nogil:
        if Cout == 8:
            w4 = (W >> 2) << 2
            for d in range(D):
                for h in range(H):
                    for w in range(0, w4, 4):
                        _conv_w4_c8(&xp[d, h, 0, 0], &w3[0, 0, 0],
                                    &out[n, 0], w, Cin, sy, sz)
                        n += 4
                    for w in range(w4, W):
                        for co in range(8):
                            acc[co] = 0.0
                        tap = 0
                        for dz in range(3):
                            for dy in range(3):
                                for dx in range(3):
                                    _fma_row(&xp[d + dz, h + dy, w + dx, 0],
                                             &w3[tap, 0, 0], acc, Cin, 8, 1)
                                    tap += 1
                        orow = &out[n, 0]
                        for co in range(8):
                            orow[co] = acc[co]
                        n += 1
        elif Cout == 1:
            for d in range(D):
                for h in range(H):
                    for w in range(W):
                        s = 0.0
                        tap = 0
                        for dz in range(3):
                            for dy in range(3):
                                for dx in range(3):
                                    s += _dot_row(&xp[d + dz, h + dy, w + dx, 0],
                                                  &w3[tap, 0, 0], Cin, mb)
                                    tap += 1
                        out[n, 0] = s
                        n += 1
        else:
            for d in range(D):
                for h in range(H):
                    for w in range(W):
                        for co in range(Cout):
                            acc[co] = 0.0
                        tap = 0
                        for dz in range(3):
                            for dy in range(3):
                                for dx in range(3):
                                    _fma_row(&xp[d + dz, h + dy, w + dx, 0],
                                             &w3[tap, 0, 0], acc, Cin, Cout, nb)
                                    tap += 1
                        orow = &out[n, 0]
                        for co in range(Cout):
                            orow[co] = acc[co]
                        n += 1
    return out_arr, None


cdef inline void _dw_w4_c8(const float* xp, const float* dyr, float* acc,
                           int w, int Cin, long sy, long sz) noexcept nogil:
    cdef float d0[8]
    cdef float d1[8]
    cdef float d2[8]
    cdef float d3[8]
    cdef int dz, dyy, dx, ci, j
    cdef float x0, x1, x2, x3
    cdef const float* xr
    cdef float* ap
    for j in range(8):
        d0[j] = dyr[j]; d1[j] = dyr[8 + j]
        d2[j] = dyr[16 + j]; d3[j] = dyr[24 + j]
    ap = acc
    for dz in range(3):
        for dyy in range(3):
            for dx in range(3):
                xr = xp + dz * sz + dyy * sy + (w + dx) * Cin
                for ci in range(Cin):
                    x0 = xr[ci]
                    x1 = xr[Cin + ci]
                    x2 = xr[2 * Cin + ci]
                    x3 = xr[3 * Cin + ci]
                    for j in range(8):
                        ap[ci * 8 + j] = ap[ci * 8 + j] + x0 * d0[j] + x1 * d1[j] \
                            + x2 * d2[j] + x3 * d3[j]
                ap += Cin * 8


def conv3d_dw(float[:, :, :, ::1] xp, cache, float[:, ::1] dy, int D, int H, int W, int Cin):
    """Weight gradient for conv3d_fwd; single pass, tap accumulators in L1."""
    cdef int Cout = dy.shape[1]
    dw_arr = np.zeros((27, Cin, Cout), np.float32)
    cdef float[:, :, ::1] dw = dw_arr
    cdef float* acc = <float*> malloc(27 * Cin * Cout * sizeof(float))
    if acc == NULL:
        raise MemoryError()
    memset(acc, 0, 27 * Cin * Cout * sizeof(float))
    cdef int nb = Cout >> 3
    cdef int d, h, w, w4, dz, dyy, dx, tap, ci, co, n, i
    cdef const float* xrow
    cdef const float* dyrow
    cdef long sy = (<long> (W + 2)) * Cin
    cdef long sz = (<long> (H + 2)) * sy
    n = 0
    with nogil:
        if Cout == 8:
            w4 = (W >> 2) << 2
            for d in range(D):
                for h in range(H):
                    for w in range(0, w4, 4):
                        _dw_w4_c8(&xp[d, h, 0, 0], &dy[n, 0], acc, w, Cin, sy, sz)
                        n += 4
                    for w in range(w4, W):
                        dyrow = &dy[n, 0]
                        tap = 0
                        for dz in range(3):
                            for dyy in range(3):
                                for dx in range(3):
                                    _fma_outer(&xp[d + dz, h + dyy, w + dx, 0],
                                               dyrow, acc + tap * Cin * 8, Cin, 8, 1)
                                    tap += 1
                        n += 1
        else:
            for d in range(D):
                for h in range(H):
                    for w in range(W):
                        dyrow = &dy[n, 0]
                        tap = 0
                        for dz in range(3):
                            for dyy in range(3):
                                for dx in range(3):
                                    xrow = &xp[d + dz, h + dyy, w + dx, 0]
                                    _fma_outer(xrow, dyrow, acc + tap * Cin * Cout,
                                               Cin, Cout, nb)
                                    tap += 1
                        n += 1
    cdef float* dwp = &dw[0, 0, 0]
    for i in range(27 * Cin * Cout):
        dwp[i] = acc[i]
    free(acc)
    return dw_arr


cdef inline void _fma_outer(const float* xrow, const float* dyrow, float* ap,
                            int Cin, int Cout, int nb) noexcept nogil:
    cdef int ci, cb, j, co, base
    cdef float xv, g
    cdef float* p
    if Cout == 1:
        g = dyrow[0]
        for ci in range(Cin):
            ap[ci] = ap[ci] + xrow[ci] * g
        return
    for ci in range(Cin):
        xv = xrow[ci]
        p = ap + ci * Cout
        for cb in range(nb):
            base = cb * 8
            for j in range(8):
                p[base + j] = p[base + j] + xv * dyrow[base + j]
        for co in range(nb * 8, Cout):
            p[co] = p[co] + xv * dyrow[co]


def raycast(const unsigned char[:, :, ::1] labels, origin, double[:, ::1] dirs,
            grid_min, double res, double t_max):
    """First non-free voxel along each ray; see _npk.raycast."""
    cdef int D = labels.shape[0]
    cdef int H = labels.shape[1]
    cdef int W = labels.shape[2]
    cdef Py_ssize_t n = dirs.shape[0]
    t_arr = np.full(n, -1.0, np.float64)
    vox_arr = np.full((n, 3), -1, np.int32)
    cls_arr = np.zeros(n, np.uint8)
    cdef double[::1] t = t_arr
    cdef int[:, ::1] vox = vox_arr
    cdef unsigned char[::1] cls = cls_arr

    cdef double gx = (float(origin[0]) - float(grid_min[0])) / res
    cdef double gy = (float(origin[1]) - float(grid_min[1])) / res
    cdef double gz = (float(origin[2]) - float(grid_min[2])) / res
    if not (0 <= gx < W and 0 <= gy < H and 0 <= gz < D):
        raise ValueError("ray origin must lie inside the grid")

    cdef Py_ssize_t i
    cdef double dx, dy, dz, tx, ty, tz, dtx, dty, dtz, te, best
    cdef long cx, cy, cz, sx, sy, sz
    cdef int ax
    cdef unsigned char lab
    cdef double INF = np.inf
    for i in range(n):
        dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
        cx = <long> gx
        cy = <long> gy
        cz = <long> gz
        lab = labels[cz, cy, cx]
        if lab != 0:
            t[i] = 0.0
            vox[i, 0] = <int> cz; vox[i, 1] = <int> cy; vox[i, 2] = <int> cx
            cls[i] = lab
            continue
        sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
        sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
        sz = 1 if dz > 0 else (-1 if dz < 0 else 0)
        dtx = res / abs(dx) if dx != 0 else INF
        dty = res / abs(dy) if dy != 0 else INF
        dtz = res / abs(dz) if dz != 0 else INF
        tx = ((cx + 1 - gx) * res / dx) if dx > 0 else (((cx - gx) * res / dx) if dx < 0 else INF)
        ty = ((cy + 1 - gy) * res / dy) if dy > 0 else (((cy - gy) * res / dy) if dy < 0 else INF)
        tz = ((cz + 1 - gz) * res / dz) if dz > 0 else (((cz - gz) * res / dz) if dz < 0 else INF)
        while True:
            best = tx; ax = 0
            if ty < best:
                best = ty; ax = 1
            if tz < best:
                best = tz; ax = 2
            te = best
            if ax == 0:
                cx += sx; tx += dtx
            elif ax == 1:
                cy += sy; ty += dty
            else:
                cz += sz; tz += dtz
            if te > t_max or cx < 0 or cx >= W or cy < 0 or cy >= H or cz < 0 or cz >= D:
                break
            lab = labels[cz, cy, cx]
            if lab != 0:
                t[i] = te
                vox[i, 0] = <int> cz; vox[i, 1] = <int> cy; vox[i, 2] = <int> cx
                cls[i] = lab
                break
    return t_arr, vox_arr, cls_arr


def bilinear_gather(float[:, :, ::1] fmap, float[:, ::1] pts):
    cdef int H = fmap.shape[0]
    cdef int W = fmap.shape[1]
    cdef int C = fmap.shape[2]
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.zeros((n, C), np.float32)
    cdef float[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef int c, x0, y0
    cdef float x, y, fx, fy, w00, w10, w01, w11
    for i in range(n):
        x = pts[i, 0]; y = pts[i, 1]
        x0 = <int> x
        if x0 > x: x0 -= 1
        y0 = <int> y
        if y0 > y: y0 -= 1
        fx = x - x0; fy = y - y0
        w00 = (1 - fx) * (1 - fy); w10 = fx * (1 - fy)
        w01 = (1 - fx) * fy;       w11 = fx * fy
        if 0 <= x0 < W and 0 <= y0 < H:
            for c in range(C):
                out[i, c] += w00 * fmap[y0, x0, c]
        if 0 <= x0 + 1 < W and 0 <= y0 < H:
            for c in range(C):
                out[i, c] += w10 * fmap[y0, x0 + 1, c]
        if 0 <= x0 < W and 0 <= y0 + 1 < H:
            for c in range(C):
                out[i, c] += w01 * fmap[y0 + 1, x0, c]
        if 0 <= x0 + 1 < W and 0 <= y0 + 1 < H:
            for c in range(C):
                out[i, c] += w11 * fmap[y0 + 1, x0 + 1, c]
    return out_arr


def bilinear_bwd(float[:, :, ::1] fmap, float[:, ::1] pts, float[:, ::1] dout,
                 float[:, :, ::1] dmap, float[:, ::1] dpts):
    cdef int H = fmap.shape[0]
    cdef int W = fmap.shape[1]
    cdef int C = fmap.shape[2]
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t i
    cdef int c, x0, y0
    cdef bint in00, in10, in01, in11
    cdef float x, y, fx, fy, g, gx, gy
    cdef float v00, v10, v01, v11
    for i in range(n):
        x = pts[i, 0]; y = pts[i, 1]
        x0 = <int> x
        if x0 > x: x0 -= 1
        y0 = <int> y
        if y0 > y: y0 -= 1
        fx = x - x0; fy = y - y0
        in00 = 0 <= x0 < W and 0 <= y0 < H
        in10 = 0 <= x0 + 1 < W and 0 <= y0 < H
        in01 = 0 <= x0 < W and 0 <= y0 + 1 < H
        in11 = 0 <= x0 + 1 < W and 0 <= y0 + 1 < H
        gx = 0.0; gy = 0.0
        for c in range(C):
            g = dout[i, c]
            v00 = fmap[y0, x0, c] if in00 else 0.0
            v10 = fmap[y0, x0 + 1, c] if in10 else 0.0
            v01 = fmap[y0 + 1, x0, c] if in01 else 0.0
            v11 = fmap[y0 + 1, x0 + 1, c] if in11 else 0.0
            if in00:
                dmap[y0, x0, c] += (1 - fx) * (1 - fy) * g
            if in10:
                dmap[y0, x0 + 1, c] += fx * (1 - fy) * g
            if in01:
                dmap[y0 + 1, x0, c] += (1 - fx) * fy * g
            if in11:
                dmap[y0 + 1, x0 + 1, c] += fx * fy * g
            gx += ((v10 - v00) * (1 - fy) + (v11 - v01) * fy) * g
            gy += ((v01 - v00) * (1 - fx) + (v11 - v10) * fx) * g
        dpts[i, 0] += gx
        dpts[i, 1] += gy


def scatter_add_rows(long[::1] idx, float[:, ::1] vals, float[:, ::1] out):
    cdef Py_ssize_t m = idx.shape[0]
    cdef int C = vals.shape[1]
    cdef Py_ssize_t i
    cdef int c
    cdef long j
    for i in range(m):
        j = idx[i]
        for c in range(C):
            out[j, c] += vals[i, c]


def scatter_min(long[::1] idx, double[::1] vals, double[::1] out):
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t i
    cdef long j
    for i in range(m):
        j = idx[i]
        if vals[i] < out[j]:
            out[j] = vals[i]


def argsort_desc(float[::1] x):
    """Stable descending argsort via 4-pass LSD radix on transformed keys."""
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, np.int64)
    cdef long[::1] out = out_arr
    cdef unsigned int* keys = <unsigned int*> malloc(n * sizeof(unsigned int))
    cdef unsigned int* keys2 = <unsigned int*> malloc(n * sizeof(unsigned int))
    cdef long* idx2 = <long*> malloc(n * sizeof(long))
    if keys == NULL or keys2 == NULL or idx2 == NULL:
        free(keys); free(keys2); free(idx2)
        raise MemoryError()
    if n == 0:
        return out_arr
    cdef Py_ssize_t i
    cdef unsigned int b, k
    cdef const unsigned int* bits = <const unsigned int*> &x[0]
    for i in range(n):
        b = bits[i]
        # ascending key for the float ordering, then inverted for descending
        k = (~b) if (b & 0x80000000u) else (b | 0x80000000u)
        keys[i] = ~k
        out[i] = i
    cdef long counts[256]
    cdef long offs[256]
    cdef int p, d
    cdef long acc_, cnt
    cdef unsigned int* ksrc = keys
    cdef unsigned int* kdst = keys2
    cdef long* isrc = &out[0]
    cdef long* idst = idx2
    cdef long* tmpl
    cdef unsigned int* tmpk
    for p in range(4):
        for d in range(256):
            counts[d] = 0
        for i in range(n):
            counts[(ksrc[i] >> (8 * p)) & 0xFF] += 1
        acc_ = 0
        for d in range(256):
            cnt = counts[d]
            offs[d] = acc_
            acc_ += cnt
        for i in range(n):
            d = (ksrc[i] >> (8 * p)) & 0xFF
            kdst[offs[d]] = ksrc[i]
            idst[offs[d]] = isrc[i]
            offs[d] += 1
        tmpk = ksrc; ksrc = kdst; kdst = tmpk
        tmpl = isrc; isrc = idst; idst = tmpl
    # 4 passes: results are back in the original buffers (even swap count)
    free(keys); free(keys2); free(idx2)
    return out_arr
