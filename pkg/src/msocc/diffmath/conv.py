"""Convolution ops.

The pipeline keeps voxel grids channels-last (D, H, W, C), matching the
compiled kernels; conv3d with the channels-first calling convention is a
thin transpose wrapper around the same core. 2D convs run on images small
enough that an im2col matmul in numpy is already cheap.
"""

import numpy as np

from .. import _kernels as K
from .tensor import Tensor, _out


def _pad3(x, c):
    D, H, W = x.shape[:3]
    xp = np.zeros((D + 2, H + 2, W + 2, c), np.float32)
    xp[1:-1, 1:-1, 1:-1, :] = x
    return xp


def conv3d_cl(x, w):
    """x: (D, H, W, Cin), w: (Cout, Cin, 3, 3, 3) -> (D, H, W, Cout)."""
    D, H, W, Cin = x.data.shape
    Cout = w.data.shape[0]
    if w.data.shape[1] != Cin:
        raise ValueError(f"conv3d channel mismatch: input {Cin}, kernel {w.data.shape[1]}")
    xp = _pad3(x.data, Cin)
    w3 = np.ascontiguousarray(w.data.transpose(2, 3, 4, 1, 0).reshape(27, Cin, Cout))
    out2, cache = K.conv3d_fwd(xp, w3, D, H, W)

    def bwd(t):
        def run():
            dy2 = np.ascontiguousarray(t.grad.reshape(D * H * W, Cout))
            if w.requires_grad:
                dw3 = K.conv3d_dw(xp, cache, dy2, D, H, W, Cin)
                w.accum(np.ascontiguousarray(
                    dw3.reshape(3, 3, 3, Cin, Cout).transpose(4, 3, 0, 1, 2)))
            if x.requires_grad:
                # full correlation with the flipped, transposed kernel
                dyp = _pad3(dy2.reshape(D, H, W, Cout), Cout)
                wT = np.ascontiguousarray(w3[::-1].transpose(0, 2, 1))
                dx2, _ = K.conv3d_fwd(dyp, wT, D, H, W)
                x.accum(dx2.reshape(D, H, W, Cin))
        return run

    return _out(out2.reshape(D, H, W, Cout), (x, w), "conv3d", bwd)


def conv3d(x, w):
    """Channels-first convenience: x (Cin, D, H, W), w (Cout, Cin, 3, 3, 3)."""
    from .tensor import transpose

    y = conv3d_cl(transpose(x, (1, 2, 3, 0)), w)
    return transpose(y, (3, 0, 1, 2))


def conv_transpose3d_cl(x, w):
    """Stride-2 2x2x2 transposed conv. x: (D, H, W, Cin), w: (2, 2, 2, Cin, Cout)."""
    D, H, W, Cin = x.data.shape
    Cout = w.data.shape[4]
    x2 = x.data.reshape(D * H * W, Cin)
    wr = np.ascontiguousarray(w.data.reshape(8, Cin, Cout).transpose(1, 0, 2)
                              .reshape(Cin, 8 * Cout))
    y = (x2 @ wr).reshape(D, H, W, 2, 2, 2, Cout)
    data = np.ascontiguousarray(y.transpose(0, 3, 1, 4, 2, 5, 6)).reshape(
        2 * D, 2 * H, 2 * W, Cout)

    def bwd(t):
        def run():
            g = t.grad.reshape(D, 2, H, 2, W, 2, Cout).transpose(0, 2, 4, 1, 3, 5, 6)
            g2 = np.ascontiguousarray(g).reshape(D * H * W, 8 * Cout)
            if x.requires_grad:
                x.accum((g2 @ wr.T).reshape(D, H, W, Cin))
            if w.requires_grad:
                dw = (x2.T @ g2).reshape(Cin, 8, Cout).transpose(1, 0, 2)
                w.accum(np.ascontiguousarray(dw).reshape(2, 2, 2, Cin, Cout))
        return run

    return _out(data, (x, w), "conv_transpose3d", bwd)


def conv2d_cl(x, w, stride=1):
    """x: (H, W, Cin), w: (Cout, Cin, 3, 3), zero pad 1 -> (H', W', Cout)."""
    H, W, Cin = x.data.shape
    Cout = w.data.shape[0]
    if w.data.shape[1] != Cin:
        raise ValueError(f"conv2d channel mismatch: input {Cin}, kernel {w.data.shape[1]}")
    s = stride
    Hs = (H + 2 - 3) // s + 1
    Ws = (W + 2 - 3) // s + 1
    xp = np.zeros((H + 2, W + 2, Cin), np.float32)
    xp[1:-1, 1:-1, :] = x.data
    cols = np.empty((Hs, Ws, 9, Cin), np.float32)
    t = 0
    for dy in range(3):
        for dx in range(3):
            cols[:, :, t, :] = xp[dy : dy + (Hs - 1) * s + 1 : s,
                                  dx : dx + (Ws - 1) * s + 1 : s, :]
            t += 1
    c2 = cols.reshape(Hs * Ws, 9 * Cin)
    w2 = np.ascontiguousarray(w.data.transpose(2, 3, 1, 0).reshape(9 * Cin, Cout))
    data = (c2 @ w2).reshape(Hs, Ws, Cout)

    def bwd(t_):
        def run():
            dy2 = t_.grad.reshape(Hs * Ws, Cout)
            if w.requires_grad:
                dw2 = c2.T @ dy2
                w.accum(np.ascontiguousarray(
                    dw2.reshape(3, 3, Cin, Cout).transpose(3, 2, 0, 1)))
            if x.requires_grad:
                dcols = (dy2 @ w2.T).reshape(Hs, Ws, 9, Cin)
                dxp = np.zeros_like(xp)
                k = 0
                for dy in range(3):
                    for dx in range(3):
                        dxp[dy : dy + (Hs - 1) * s + 1 : s,
                            dx : dx + (Ws - 1) * s + 1 : s, :] += dcols[:, :, k, :]
                        k += 1
                x.accum(dxp[1:-1, 1:-1, :])
        return run

    return _out(data, (x, w), "conv2d", bwd)
