"""Kernel backend selection.

Prefers the compiled extension; falls back to the NumPy port when the
extension was not built.  Both expose the same functions and signatures.
"""

try:
    from fplap import _kernels as _impl

    BACKEND = "cython"
except ImportError:  # extension not built
    from fplap import _kernels_py as _impl

    BACKEND = "python"

energy = _impl.energy
apply_op = _impl.apply_op
pair_dual = _impl.pair_dual
hess_action = _impl.hess_action
hess_matrix = _impl.hess_matrix


def backend():
    """Name of the kernel backend in use ('cython' or 'python')."""
    return BACKEND
