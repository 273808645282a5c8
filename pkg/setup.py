from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the pure-Python kernel is used instead
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("star_forge._moyal_ext", ["src/star_forge/_moyal_ext.pyx"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
