"""Build the optional compiled kernel extension.

The package works without it (a NumPy fallback is selected at import), so a
failed cythonization or missing compiler only costs speed, never correctness.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/fplap/_kernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"fplap: skipping compiled kernels ({exc!r}); NumPy fallback will be used")

setup(ext_modules=ext_modules)
