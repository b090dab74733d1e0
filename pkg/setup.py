import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; dcqec falls back at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("DCQEC_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "dcqec._ufcore",
                ["src/dcqec/_ufcore.pyx"],
                include_dirs=[np.get_include()],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
