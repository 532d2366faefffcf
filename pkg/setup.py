"""Build script for the optional compiled kernels.

The package works without them: ``dampwave.kernels`` falls back to the
numpy implementation when the extension is missing.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "dampwave.kernels._ext",
                ["src/dampwave/kernels/_ext.pyx"],
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
