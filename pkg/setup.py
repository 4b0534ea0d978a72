"""Build script: compiles the push-relabel core if a C toolchain is present.

The package is fully functional without the extension (a pure-Python
solver is selected at import time), so build failures are non-fatal.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "nlcheeger._maxflow_core",
                ["src/nlcheeger/_maxflow_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
