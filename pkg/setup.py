import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the accelerator if we can; the package runs without it."""

    def run(self):
        try:
            build_ext.run(self)
        except Exception as err:
            print("*** compiled core skipped: %s" % (err,))

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as err:
            print("*** compiled core skipped: %s" % (err,))


extensions = []
if os.environ.get("TOPL_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "topl._core._kernels",
                    ["src/topl/_core/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except Exception as err:
        print("*** cython unavailable, building pure-python only: %s" % (err,))

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
