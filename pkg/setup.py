"""Build script: compiles the optional kernel extension.

The package works without the extension (pure-Python kernels are selected
at import time), so any compilation failure downgrades to a warning.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            build_ext.run(self)
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc})", file=sys.stderr)


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"warning: compiled kernels unavailable ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "mpcac._fastkern",
        ["src/mpcac/_fastkern.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off: no fused multiply-add, keeps results
        # bit-identical to the pure-Python kernels.
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
