import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SPINQUANT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "spinquant._ckernels",
                ["src/spinquant/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                # no FMA contraction: keeps results identical to the Python route
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
