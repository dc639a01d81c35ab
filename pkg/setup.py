# Builds the optional compiled kernel core. If compilation is impossible the
# install still succeeds and the package falls back to the numpy kernels
# (see oraclemarch.kernels).
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
    import numpy

    extensions = cythonize(
        [
            Extension(
                "oraclemarch._native",
                sources=["src/oraclemarch/_native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3, "boundscheck": False, "wraparound": False},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
