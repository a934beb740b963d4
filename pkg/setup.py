"""Optional compiled-kernel build; the package is fully functional without
it (pure-Python fallback selected at import)."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/flashsched/kernels/_overlap.pyx",
        language_level=3,
        annotate=False,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
