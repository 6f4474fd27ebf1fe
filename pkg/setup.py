"""Optional Cython build; the package falls back to pure Python if it fails."""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("tsce._kernels._cd", ["src/tsce/_kernels/_cd.pyx"], include_dirs=[np.get_include()], optional=True)],
        language_level=3,
    )
except Exception as exc:  # noqa: BLE001 - any build tooling failure means pure Python
    print(f"warning: building without the compiled kernel ({exc})")

setup(ext_modules=ext_modules)
