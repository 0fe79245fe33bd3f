"""Discrete nonlocal operator: energy, node-wise action, duality pairing.

For a grid function u (zero outside the interval) the Gagliardo energy is

    J(u) = (1/p) [ sum_{i != j} h^2 |u_i-u_j|^p k_ij + sum_i h tail_i |u_i|^p ]

with k_ij the punctured pair kernel, and the node-wise operator action

    A(u)_i = 2h sum_{j != i} phi_p(u_i-u_j) k_ij + tail_i phi_p(u_i)

satisfies the exact discrete gradient identity  grad J(u) = h A(u)  and the
summation-by-parts identity  pair(u, v) = h <A(u), v>.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from fplap import kernels
from fplap.mesh import Mesh, ProblemParams, check_grid

REG_DELTA = 1e-10  # smoothing scale for derivative kernels when p < 2


def phi_p(t, p):
    """Odd power nonlinearity sign(t)|t|^(p-1) (vectorized)."""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def dphi_p(t, p, delta=REG_DELTA):
    """Derivative (p-1)|t|^(p-2), smoothed at scale delta for p < 2."""
    t = np.asarray(t, dtype=float)
    if p >= 2.0:
        return (p - 1.0) * np.abs(t) ** (p - 2.0)
    return (p - 1.0) * (t * t + delta * delta) ** (0.5 * (p - 2.0))


def energy(mesh: Mesh, params: ProblemParams, u) -> float:
    """Discrete Gagliardo energy J(u) >= 0 (zero only at u = 0)."""
    arr = np.ascontiguousarray(check_grid(mesh, u))
    return float(kernels.energy(arr, mesh.kernel, mesh.tails, mesh.h, params.p))


def apply(mesh: Mesh, params: ProblemParams, u) -> np.ndarray:
    """Node-wise operator action A(u); equals grad J(u) / h exactly."""
    arr = np.ascontiguousarray(check_grid(mesh, u))
    return np.asarray(kernels.apply_op(arr, mesh.kernel, mesh.tails, mesh.h, params.p))


def pair(mesh: Mesh, params: ProblemParams, u, v) -> float:
    """Duality pairing <A(u), v> as a direct double sum.

    Satisfies pair(u, v) = h * sum_i A(u)_i v_i and pair(u, u) = p J(u).
    """
    ua = np.ascontiguousarray(check_grid(mesh, u))
    va = np.ascontiguousarray(check_grid(mesh, v))
    return float(kernels.pair_dual(ua, va, mesh.kernel, mesh.tails, mesh.h, params.p))


def _warn_regularized(p):
    if p < 2.0:
        warnings.warn(
            f"p = {p} < 2: second-derivative kernel regularized at scale {REG_DELTA}",
            stacklevel=3,
        )


def second_derivative_action(mesh: Mesh, params: ProblemParams, u, w) -> np.ndarray:
    """Directional derivative of A at u in direction w.

    Symmetric as a bilinear form in the h-weighted inner product; for p = 2
    it is independent of u (the operator is linear).
    """
    ua = np.ascontiguousarray(check_grid(mesh, u))
    wa = np.ascontiguousarray(check_grid(mesh, w))
    _warn_regularized(params.p)
    return np.asarray(
        kernels.hess_action(ua, wa, mesh.kernel, mesh.tails, mesh.h, params.p, REG_DELTA)
    )


def jacobian(mesh: Mesh, params: ProblemParams, u) -> np.ndarray:
    """Dense Jacobian matrix of u -> A(u) (symmetric, positive semidefinite)."""
    ua = np.ascontiguousarray(check_grid(mesh, u))
    _warn_regularized(params.p)
    return np.asarray(
        kernels.hess_matrix(ua, mesh.kernel, mesh.tails, mesh.h, params.p, REG_DELTA)
    )


@dataclass(frozen=True)
class OperatorAction:
    """Bundled action of the operator at a state: residual vector and energy."""

    residual: np.ndarray
    energy: float


def action(mesh: Mesh, params: ProblemParams, u) -> OperatorAction:
    """Evaluate A(u) and J(u) together."""
    return OperatorAction(residual=apply(mesh, params, u), energy=energy(mesh, params, u))
