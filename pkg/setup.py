"""Builds the compiled simulation kernel when Cython and a C compiler exist.

Without them the package installs unchanged and runs on the pure-Python
kernel.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "flcqm._engine_cy",
                ["src/flcqm/_engine_cy.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
