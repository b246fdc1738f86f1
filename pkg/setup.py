# Builds the optional compiled kernels in-place:
#   python setup.py build_ext --inplace
#
# The package works without this step; trajcheck.kernels falls back to the
# pure-Python implementations when the extension is missing.

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "trajcheck.kernels._speedups",
                ["src/trajcheck/kernels/_speedups.pyx"],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
