"""Build script: compiles the optional quadrature core extension.

The package is fully functional without the extension (a NumPy fallback
is selected at import); the extension only accelerates the hot
(x, h, sigma) triple loops.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "magsob._core",
                sources=["src/magsob/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
