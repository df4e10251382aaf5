# setup.py
# The compiled kernels are optional: if Cython or a C compiler is missing the
# package installs without them and typelab.kernels falls back to numpy.

import os

from setuptools import setup

ext_modules = []
if os.environ.get("TYPELAB_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "typelab._ckernels",
                    sources=["src/typelab/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
