from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("nyonscope._kernels", ["src/nyonscope/_kernels.pyx"], extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
