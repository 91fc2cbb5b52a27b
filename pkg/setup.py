"""Build script: compiles the optional attention-kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set PLIGRAPH_NO_EXT=1 to skip compilation entirely.
"""

import os

import numpy as np
from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class OptionalBuildExt(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler / toolchain
            print(f"pligraph: skipping compiled kernels ({exc}); "
                  "numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"pligraph: failed to build {ext.name} ({exc}); "
                  "numpy fallback will be used")


def extensions():
    if os.environ.get("PLIGRAPH_NO_EXT"):
        return []
    from Cython.Build import cythonize

    ext = Extension(
        "pligraph.kernels._core",
        sources=["src/pligraph/kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
