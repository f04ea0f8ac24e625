"""Build script for the optional Cython kernel extensions.

The package works without them (a pure-numpy fallback is selected at import),
so any failure here downgrades to a source-only install instead of aborting.
Set MSOCC_PORTABLE=1 to drop -march=native from the fast kernels.
"""

import os

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    fast_args = ["-O3", "-fno-math-errno"]
    if not os.environ.get("MSOCC_PORTABLE"):
        fast_args.append("-march=native")
    # The splat kernel is compared bitwise against a numpy oracle; FMA
    # contraction would change the float64 rounding, so it is pinned off
    # for that translation unit only.
    exact_args = ["-O2", "-ffp-contract=off"]

    ext_modules = cythonize(
        [
            Extension(
                "msocc._kernels._fastk",
                ["src/msocc/_kernels/_fastk.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=fast_args,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            ),
            Extension(
                "msocc._kernels._exactk",
                ["src/msocc/_kernels/_exactk.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=exact_args,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            ),
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    print(f"msocc: skipping Cython extensions ({exc}); numpy fallback will be used")
    ext_modules = []

setup(ext_modules=ext_modules)
