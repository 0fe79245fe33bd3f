"""Shared fixtures and independently-coded oracles.

The oracle helpers here deliberately re-derive everything from the closed
forms with plain Python loops instead of reusing the package's vectorized
assembly, so agreement is a two-implementation check.
"""

import numpy as np
import pytest

from fplap.mesh import ProblemParams, build_mesh
from fplap.reaction import ModelReaction, Reaction
from fplap.variational import SolverOptions


def make_params(p=2.0, s=0.4, a=-1.0, b=1.0, n=16, c0=20.0, q=4.0):
    return ProblemParams(p=p, s=s, a=a, b=b, n=n, c0=c0, q=q)


def oracle_nodes(a, b, n):
    h = (b - a) / (n + 1)
    return np.array([a + (i + 1) * h for i in range(n)]), h


def oracle_tails(a, b, n, p, s):
    # t_i = 2/(ps) * ((b - x)^(-ps) + (x - a)^(-ps)), the exterior integral
    xs, _ = oracle_nodes(a, b, n)
    ps = p * s
    return np.array([(2.0 / ps) * ((b - x) ** (-ps) + (x - a) ** (-ps)) for x in xs])


def dense_p2_matrix(a, b, n, s):
    """Explicit matrix of the p = 2 operator, assembled with its own loops."""
    xs, h = oracle_nodes(a, b, n)
    tails = oracle_tails(a, b, n, 2.0, s)
    m = np.zeros((n, n))
    for i in range(n):
        diag = tails[i]
        for j in range(n):
            if j == i:
                continue
            k = abs(xs[i] - xs[j]) ** (-1.0 - 2.0 * s)
            m[i, j] = -2.0 * h * k
            diag += 2.0 * h * k
        m[i, i] = diag
    return m


def oracle_apply(u, a, b, n, p, s):
    """Node action by direct summation, independent of the kernels module."""
    xs, h = oracle_nodes(a, b, n)
    tails = oracle_tails(a, b, n, p, s)
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            d = u[i] - u[j]
            acc += np.sign(d) * abs(d) ** (p - 1.0) * abs(xs[i] - xs[j]) ** (-1.0 - p * s)
        out[i] = 2.0 * h * acc + tails[i] * np.sign(u[i]) * abs(u[i]) ** (p - 1.0)
    return out


def oracle_energy(u, a, b, n, p, s):
    xs, h = oracle_nodes(a, b, n)
    tails = oracle_tails(a, b, n, p, s)
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if j != i:
                acc += h * h * abs(u[i] - u[j]) ** p * abs(xs[i] - xs[j]) ** (-1.0 - p * s)
        acc += h * tails[i] * abs(u[i]) ** p
    return acc / p


class LinearReaction(Reaction):
    """f(x, t) = t, the simplest nontrivial reaction for truncation tests."""

    def __init__(self):
        self.c0 = 2.0
        self.q = 2.0

    def eval(self, x, t):
        return np.asarray(t, dtype=float) + np.zeros_like(np.asarray(x, dtype=float))

    def primitive(self, x, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * t * t + np.zeros_like(np.asarray(x, dtype=float))

    def deriv_t(self, x, t):
        return np.ones_like(np.asarray(t, dtype=float) + np.asarray(x, dtype=float))


class ExpReaction(Reaction):
    """f(x, t) = exp(t); violates every polynomial growth budget."""

    def __init__(self, c0=100.0, q=8.0):
        self.c0 = c0
        self.q = q

    def eval(self, x, t):
        return np.exp(np.asarray(t, dtype=float)) + 0.0 * np.asarray(x, dtype=float)

    def primitive(self, x, t):
        return np.exp(np.asarray(t, dtype=float)) - 1.0 + 0.0 * np.asarray(x, dtype=float)

    def deriv_t(self, x, t):
        return np.exp(np.asarray(t, dtype=float)) + 0.0 * np.asarray(x, dtype=float)


@pytest.fixture(scope="session")
def params16():
    return make_params(n=16)


@pytest.fixture(scope="session")
def mesh16(params16):
    return build_mesh(params16)


@pytest.fixture(scope="session")
def params32():
    return make_params(n=32)


@pytest.fixture(scope="session")
def mesh32(params32):
    return build_mesh(params32)


@pytest.fixture(scope="session")
def opts():
    return SolverOptions()


@pytest.fixture(scope="session")
def eig16(mesh16, params16, opts):
    from fplap.spectral import principal_eigenpair

    return principal_eigenpair(mesh16, params16, None, opts)


def model_for(params, mu, kappa=1.0):
    return ModelReaction(p=params.p, q=params.q, mu=mu, kappa=kappa)


def supersolution_source(params, mu, kappa=1.0):
    """A constant strictly above max_t f(t) for the model reaction."""
    tstar = ((params.p - 1.0) * mu / ((params.q - 1.0) * kappa)) ** (
        1.0 / (params.q - params.p))
    fmax = mu * tstar ** (params.p - 1.0) - kappa * tstar ** (params.q - 1.0)
    return float(max(fmax, 0.0)) + 1.0
