"""Build script for the optional compiled TD-learning kernel.

The package works without the extension (a pure-Python kernel is selected at
import time); building it just makes long learning runs much faster.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "rabin_synth._tdcore",
                ["src/rabin_synth/_tdcore.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps float op-for-op identical to the
                # pure-Python kernel (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
        },
    )

setup(ext_modules=extensions)
