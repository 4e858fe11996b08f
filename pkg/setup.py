"""Build the optional compiled kernels.

If Cython or a C compiler is unavailable the package still installs and
runs on the numpy fallback in ``mscrowd._kernels._fallback``.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("MSCROWD_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "mscrowd._kernels._core",
                    ["src/mscrowd/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
