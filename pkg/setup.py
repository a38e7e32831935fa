# Builds the optional compiled recurrence kernels. The package works without
# them (pure-numpy fallback selected at import), so a failed extension build
# only prints a warning instead of failing the install.
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "kinject.lmkernels.gru_cython",
                sources=["src/kinject/lmkernels/gru_cython.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"warning: compiled kernels unavailable, using numpy fallback ({exc})",
          file=sys.stderr)

setup(ext_modules=ext_modules)
