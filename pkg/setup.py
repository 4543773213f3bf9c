import os
import warnings

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    warnings.warn("Cython or numpy missing; installing the pure-Python backend only.")
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "cipround._kernels",
                ["src/cipround/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # row activities must match the fallback's sequential sums bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

if os.environ.get("CIPROUND_NO_EXT"):
    ext_modules = []

setup(ext_modules=ext_modules)
