"""Problem parameters and the uniform interior grid.

The domain is an open interval (a, b) discretized by n interior nodes
x_i = a + (i+1) h with spacing h = (b-a)/(n+1).  Functions are extended by
zero outside (a, b); the interaction with the exterior is exact for the
singular kernel |x-y|^(-1-ps) and enters through closed-form tail weights

    tail_i = (2/(ps)) * ((b-x_i)^(-ps) + (x_i-a)^(-ps)),

while interior interactions use the punctured pair kernel |x_i-x_j|^(-1-ps)
(diagonal omitted).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from fplap.errors import ParameterError

DIM = 1  # ambient dimension of the interval problem


@dataclass(frozen=True)
class ProblemParams:
    """Validated problem parameters.

    Parameters
    ----------
    p : exponent of the nonlinearity (> 1; the solvers assume p >= 2 and a
        warning is emitted below that).
    s : fractional order in (0, 1).
    a, b : interval endpoints, a < b.
    n : number of interior nodes (>= 1).
    c0 : growth constant of the reaction budget (> 0).
    q : growth exponent, q > p and q < p_star when the latter is finite.
    """

    p: float
    s: float
    a: float
    b: float
    n: int
    c0: float
    q: float

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p <= 1.0:
            raise ParameterError(f"p must satisfy p > 1, got {self.p}")
        if not (0.0 < self.s < 1.0):
            raise ParameterError(f"s must lie in (0, 1), got {self.s}")
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise ParameterError(f"interval endpoints must satisfy a < b, got ({self.a}, {self.b})")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be an integer >= 1, got {self.n}")
        if not (self.c0 > 0.0):
            raise ParameterError(f"c0 must be positive, got {self.c0}")
        if not (self.q > self.p):
            raise ParameterError(f"q must exceed p, got q={self.q} with p={self.p}")
        ps = self.critical_exponent
        if np.isfinite(ps) and not (self.q < ps):
            raise ParameterError(
                f"q must lie below the critical exponent {ps:.6g}, got q={self.q}"
            )
        if self.p < 2.0:
            warnings.warn(
                f"p = {self.p} < 2: derivative kernels are regularized; "
                "results outside the primary p >= 2 regime",
                stacklevel=2,
            )
        if self.p * self.s >= DIM:
            warnings.warn(
                f"p*s = {self.p * self.s:.6g} >= {DIM}: outside the ps < N regime, "
                "the critical exponent is treated as infinite",
                stacklevel=2,
            )

    @property
    def critical_exponent(self) -> float:
        """Sobolev critical exponent N p / (N - ps); infinite for ps >= N."""
        ps = self.p * self.s
        if ps >= DIM:
            return float("inf")
        return DIM * self.p / (DIM - ps)


@dataclass(frozen=True)
class Mesh:
    """Immutable uniform grid with precomputed kernel data.

    Fields: interior nodes, spacing h, boundary distances, exterior tail
    weights, and the dense pair-kernel matrix (zero diagonal).
    """

    nodes: np.ndarray
    h: float
    dist: np.ndarray
    tails: np.ndarray
    kernel: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.shape[0]


def build_mesh(params: ProblemParams) -> Mesh:
    """Construct the uniform mesh and its kernel data for `params`."""
    n = int(params.n)
    h = (params.b - params.a) / (n + 1)
    nodes = params.a + h * np.arange(1, n + 1, dtype=float)
    dist = np.minimum(nodes - params.a, params.b - nodes)
    ps = params.p * params.s
    tails = (2.0 / ps) * ((params.b - nodes) ** (-ps) + (nodes - params.a) ** (-ps))
    diff = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(diff, 1.0)  # placeholder, diagonal zeroed below
    kernel = diff ** (-1.0 - ps)
    np.fill_diagonal(kernel, 0.0)
    for arr in (nodes, dist, tails, kernel):
        arr.setflags(write=False)
    return Mesh(nodes=nodes, h=h, dist=dist, tails=tails, kernel=kernel)


def check_grid(mesh: Mesh, u) -> np.ndarray:
    """Validate a grid function: shape (n,), finite entries; returns float64 view."""
    arr = np.asarray(u, dtype=float)
    if arr.shape != (mesh.n,):
        raise ParameterError(f"grid function has shape {arr.shape}, expected ({mesh.n},)")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("grid function contains non-finite entries")
    return arr


def weighted_sup(mesh: Mesh, u, s: float):
    """Boundary-weighted sup data: (max_i |u_i|/d_i^s, min_i u_i/d_i^s).

    A strictly positive second component certifies that u lies in the
    interior of the positive cone of the d^s-weighted space.
    """
    arr = check_grid(mesh, u)
    ratio = arr / mesh.dist**s
    return float(np.max(np.abs(ratio))), float(np.min(ratio))
