import os
import warnings

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    np = None
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("TIMING_HEDGE_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "timing_hedge._kernels",
                ["src/timing_hedge/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-Wno-unused-function"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    warnings.warn("Cython not available; timing_hedge will use the numpy kernels.")

setup(ext_modules=ext_modules)
