from setuptools import setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        ["src/vranrl/_speedups.pyx"],
        language_level=3,
    ),
)
