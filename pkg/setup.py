import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "tabgns._kernels_c",
        ["src/tabgns/_kernels_c.pyx"],
        include_dirs=[np.get_include(), "src/tabgns"],
        depends=["src/tabgns/_select.h"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
