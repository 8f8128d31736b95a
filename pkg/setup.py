"""Build script. The compiled kernel extension is optional: when Cython or a
C compiler is unavailable the package installs anyway and falls back to the
pure numpy kernels at import time."""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "plmirelax._kernels",
                ["src/plmirelax/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
