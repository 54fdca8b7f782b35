"""Build script. Compiles the optional Cython kernel; falls back to pure python."""

import os

from setuptools import Extension, setup

PYX = "src/homoplan/_kernels/_core.pyx"

extensions = []
if os.path.exists(PYX):
    try:
        import numpy as np
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "homoplan._kernels._core",
                    [PYX],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # a failed compile must not fail the install: the
                    # pure-python backend is selected at import instead
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # No Cython or numpy at build time: install pure python.
        extensions = []

setup(ext_modules=extensions)
