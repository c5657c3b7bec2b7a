"""Builds the optional compiled kernel extension.

The package works without it (a pure-Python fallback is selected at
import time); building just makes thinning and visibility ray casting
much faster on large maps.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "mapbench._kernels._native",
                ["src/mapbench/_kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                # fp-contract off: visibility math must round exactly like
                # the pure-Python fallback (bit-identical backends).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
