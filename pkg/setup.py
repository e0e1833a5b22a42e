"""Builds the optional compiled kernel; the package still installs without it."""
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler or Cython
            print(f"warning: compiled kernel not built ({exc}); using the Python fallback",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension("lagrange_swarm._ckernel", ["src/lagrange_swarm/_ckernel.pyx"],
                    include_dirs=[numpy.get_include()], extra_compile_args=["-O3"])
    return cythonize([ext], quiet=True)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
