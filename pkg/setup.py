from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "cbflearn._kernels",
                ["src/cbflearn/_kernels.pyx"],
                # no FMA contraction and no sin/cos -> sincos fusion: keeps results
                # bit-identical to the Python kernels
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-builtin"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
