"""Build hook: compile the optional Cython stepping core.

The package is fully functional without the extension (a pure-Python
stepping core with identical numerical behavior is selected at import
time); the build therefore tolerates a missing Cython or C compiler.

-ffp-contract=off keeps the compiled arithmetic bit-identical to the
pure-Python core: fused multiply-adds would otherwise round differently.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "selmut._core",
                ["src/selmut/_core.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
