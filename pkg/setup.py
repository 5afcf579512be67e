"""Build hooks for the optional compiled simulation core.

The package is pure Python plus one optional Cython extension,
flexcap._sim_cy. If Cython or a C compiler is unavailable the build
degrades to the pure install; flexcap._backend falls back to the
Python kernels at import time.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        ["src/flexcap/_sim_cy.pyx"],
        language_level="3",
        compiler_directives={"boundscheck": False, "wraparound": False},
    )


class optional_build_ext(build_ext):
    """Swallow compiler failures so the pure-Python install still works."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            print(f"warning: compiled core skipped ({exc}); using pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} skipped ({exc}); using pure-Python kernels")


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
