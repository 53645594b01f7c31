"""Builds the optional compiled kernel extension.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time); compilation failures therefore
degrade to a warning instead of aborting the install. Set
SOFTMAXLAB_NO_EXT=1 to skip the extension build entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: compiled kernels unavailable ({exc}); "
            "falling back to pure-Python kernels",
            file=sys.stderr,
        )


ext_modules = []
cmdclass = {}
if not os.environ.get("SOFTMAXLAB_NO_EXT"):
    try:
        from Cython.Build import cythonize

        # -ffp-contract=off: the pure and compiled kernels must agree
        # bit-for-bit, so FMA contraction has to stay disabled.
        ext_modules = cythonize(
            [
                Extension(
                    "softmaxlab._cykernels",
                    ["src/softmaxlab/_cykernels.pyx"],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
        cmdclass["build_ext"] = optional_build_ext
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass=cmdclass)
