"""Kernel backend dispatch.

The compiled kernels (_fastk, _exactk) are used when importable; otherwise
the pure-numpy reference (_npk) takes over. Set MSOCC_BACKEND=numpy or
=cython to force one; forcing cython raises if the extensions are missing.
Both backends implement the same functions with the same semantics, so
everything above this module is backend-agnostic.
"""

import importlib
import os

import numpy as np

from . import _npk

_choice = os.environ.get("MSOCC_BACKEND", "auto")
_fastk = None
_exactk = None
if _choice in ("auto", "cython"):
    try:
        _fastk = importlib.import_module("msocc._kernels._fastk")
        _exactk = importlib.import_module("msocc._kernels._exactk")
    except ImportError:
        _fastk = None
        _exactk = None
        if _choice == "cython":
            raise ImportError(
                "MSOCC_BACKEND=cython but the compiled kernels are not built; "
                "run pip install -e . --no-build-isolation"
            )

if _fastk is not None and _exactk is not None:
    BACKEND = "cython"
    conv3d_fwd = _fastk.conv3d_fwd
    conv3d_dw = _fastk.conv3d_dw
    raycast = _fastk.raycast
    bilinear_gather = _fastk.bilinear_gather
    bilinear_bwd = _fastk.bilinear_bwd
    scatter_add_rows = _fastk.scatter_add_rows
    scatter_min = _fastk.scatter_min
    argsort_desc = _fastk.argsort_desc

    def splat_candidates(xs, ys, us, H, W, radius):
        r = int(np.ceil(radius))
        cap = xs.shape[0] * (2 * r + 1) ** 2
        pix = np.empty(cap, np.int64)
        d2 = np.empty(cap, np.float64)
        u = np.empty(cap, np.float64)
        m = _exactk.splat_candidates(xs, ys, us, H, W, radius, pix, d2, u)
        return pix[:m], d2[:m], u[:m]

else:
    BACKEND = "numpy"
    conv3d_fwd = _npk.conv3d_fwd
    conv3d_dw = _npk.conv3d_dw
    raycast = _npk.raycast
    bilinear_gather = _npk.bilinear_gather
    bilinear_bwd = _npk.bilinear_bwd
    scatter_add_rows = _npk.scatter_add_rows
    scatter_min = _npk.scatter_min
    argsort_desc = _npk.argsort_desc
    splat_candidates = _npk.splat_candidates
