# Build the optional compiled kernel core. The package works without it
# (a numpy fallback is selected at import), so a missing compiler or
# Cython only costs speed, not functionality.
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "oscbox._kernels",
                ["src/oscbox/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
