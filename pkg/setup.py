import os

import numpy as np
from setuptools import Extension, setup

# The compiled core is optional: without Cython (or a compiler) the package
# falls back to the numpy implementation at import time.
ext_modules = []
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None and not os.environ.get("LOGITMETA_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "logitmeta._kernels",
                ["src/logitmeta/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fno-fast-math", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
