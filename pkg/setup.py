"""Build hook for the optional compiled integrator kernel.

Package metadata lives in pyproject.toml.  If Cython or a C compiler is
missing the extension is skipped and ergolab runs on the pure-Python
kernel.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler: fall back to pure Python
            print(f"ergolab: skipping compiled kernel ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"ergolab: skipping {ext.name} ({exc})")


def extensions():
    if os.environ.get("ERGOLAB_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension("ergolab.flow._kernels", ["src/ergolab/flow/_kernels.pyx"], extra_compile_args=["-O3"])
    return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
