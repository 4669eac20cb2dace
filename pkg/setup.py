"""Builds the optional compiled kernel extension.

The package works without it: evmv._kernels falls back to the pure numpy
backend when the extension is missing (see evmv/_kernels/__init__.py).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "evmv._kernels._speedups",
                sources=["src/evmv/_kernels/_speedups.pyx"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
