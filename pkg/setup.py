"""Builds the compiled kernel extension.

The extension is optional at runtime: avtk._kernels falls back to the
numpy implementations if the compiled module is absent or AVTK_KERNELS
forces the pure path. -ffp-contract=off keeps the C float arithmetic
un-fused so the compiled bilinear path stays bit-identical to numpy.
"""

from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "avtk._kernels._core",
        ["src/avtk/_kernels/_core.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
