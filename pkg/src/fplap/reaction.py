"""Reaction terms f(x, t), their primitives, and truncation devices.

All reactions expose node-wise evaluation: `x` is the array of node
coordinates (built-ins ignore it; per-node data aligns with it by position)
and `t` the function values.  Truncations freeze the reaction outside a
bound and extend the primitive linearly, which preserves C^1 regularity of
the associated functional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fplap.errors import ParameterError
from fplap.operator import dphi_p, phi_p


class Reaction:
    """Base interface: eval/primitive/deriv_t plus a growth pair (c0, q)."""

    c0: float = 1.0
    q: float = 2.0

    def eval(self, x, t):
        raise NotImplementedError

    def primitive(self, x, t):
        raise NotImplementedError

    def deriv_t(self, x, t):
        raise NotImplementedError

    def reflected(self) -> "Reaction":
        """The odd reflection g(x, t) = -f(x, -t).

        Solutions map through u -> -u: v solves the reflected problem iff -v
        solves the original one, with orderings reversed.
        """
        return ReflectedReaction(self)


class ReflectedReaction(Reaction):
    def __init__(self, base: Reaction):
        self.base = base
        self.c0 = base.c0
        self.q = base.q

    def eval(self, x, t):
        return -self.base.eval(x, -np.asarray(t, dtype=float))

    def primitive(self, x, t):
        return self.base.primitive(x, -np.asarray(t, dtype=float))

    def deriv_t(self, x, t):
        return self.base.deriv_t(x, -np.asarray(t, dtype=float))

    def reflected(self) -> Reaction:
        return self.base


class ModelReaction(Reaction):
    """f(t) = mu * phi_p(t) - kappa * |t|^(q-2) t  (odd, x-independent).

    Origin slope mu, primitive mu|t|^p/p - kappa|t|^q/q -> -inf relative to
    |t|^p, growth pair (mu + kappa, q).
    """

    def __init__(self, p: float, q: float, mu: float, kappa: float):
        if kappa <= 0.0:
            raise ParameterError(f"kappa must be positive, got {kappa}")
        if not q > p:
            raise ParameterError(f"model reaction needs q > p, got q={q}, p={p}")
        self.p = p
        self.q = q
        self.mu = mu
        self.kappa = kappa
        self.c0 = abs(mu) + kappa

    def eval(self, x, t):
        t = np.asarray(t, dtype=float)
        return self.mu * phi_p(t, self.p) - self.kappa * phi_p(t, self.q)

    def primitive(self, x, t):
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        return self.mu * at**self.p / self.p - self.kappa * at**self.q / self.q

    def deriv_t(self, x, t):
        t = np.asarray(t, dtype=float)
        return self.mu * dphi_p(t, self.p) - self.kappa * dphi_p(t, self.q)


class FixedSource(Reaction):
    """t-independent source f(x, t) = g(x); used for solves with fixed rhs."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.c0 = max(1.0, float(np.max(np.abs(self.values))) if self.values.size else 1.0)
        self.q = 3.0

    def eval(self, x, t):
        g, t = np.broadcast_arrays(self.values, np.asarray(t, dtype=float))
        return g.astype(float).copy()

    def primitive(self, x, t):
        return self.values * np.asarray(t, dtype=float)

    def deriv_t(self, x, t):
        return np.zeros_like(np.broadcast_arrays(self.values, np.asarray(t, dtype=float))[1])


class ShiftedSource(Reaction):
    """f(x, t) = g(x) - sigma * phi_p(t), the inner problem of monotone iteration.

    For sigma >= 0 the associated functional is strictly convex, so the
    solve has a unique critical point.
    """

    def __init__(self, values, sigma: float, p: float):
        self.values = np.asarray(values, dtype=float)
        self.sigma = float(sigma)
        self.p = float(p)
        self.c0 = max(1.0, float(np.max(np.abs(self.values))) + abs(sigma))
        self.q = self.p + 1.0

    def eval(self, x, t):
        t = np.asarray(t, dtype=float)
        return self.values - self.sigma * phi_p(t, self.p)

    def primitive(self, x, t):
        t = np.asarray(t, dtype=float)
        return self.values * t - self.sigma * np.abs(t) ** self.p / self.p

    def deriv_t(self, x, t):
        return -self.sigma * dphi_p(np.asarray(t, dtype=float), self.p)


def _finite_mag(bound) -> float:
    arr = np.atleast_1d(np.asarray(bound, dtype=float))
    finite = arr[np.isfinite(arr)]
    return float(np.max(np.abs(finite))) if finite.size else 0.0


class TruncatedReaction(Reaction):
    """Reaction frozen outside node-wise bounds [lower, upper].

        f~(x, t) = f(x, clip(t, lower, upper))

    with primitive F~(x, t) = F(x, c) + f(x, c) (t - c), c = clip(t, ...),
    i.e. extended linearly past each bound.  The growth pair tightens to a
    bounded budget c0 (1 + |lower|^(q-1) + |upper|^(q-1)) over finite bounds.
    """

    def __init__(self, base: Reaction, lower, upper):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if lo.shape == hi.shape or lo.ndim == 0 or hi.ndim == 0:
            bad = np.nonzero(np.atleast_1d(lo > hi))[0]
            if bad.size:
                raise ParameterError(
                    f"truncation bounds violate lower <= upper first at node {bad[0]}"
                )
        else:
            raise ParameterError("truncation bounds must share a shape or be scalar")
        self.base = base
        self.lower = lo
        self.upper = hi
        qm1 = base.q - 1.0
        self.c0 = base.c0 * (1.0 + _finite_mag(lo) ** qm1 + _finite_mag(hi) ** qm1)
        self.q = base.q

    def _clip(self, t):
        return np.clip(np.asarray(t, dtype=float), self.lower, self.upper)

    def eval(self, x, t):
        return self.base.eval(x, self._clip(t))

    def primitive(self, x, t):
        t = np.asarray(t, dtype=float)
        c = self._clip(t)
        return self.base.primitive(x, c) + self.base.eval(x, c) * (t - c)

    def deriv_t(self, x, t):
        t = np.asarray(t, dtype=float)
        inside = (t > self.lower) & (t < self.upper)  # frozen at and past bounds
        return np.where(inside, self.base.deriv_t(x, t), 0.0)


def interval_truncation(base: Reaction, lower, upper) -> TruncatedReaction:
    """Freeze `base` outside the node-wise interval [lower, upper]."""
    return TruncatedReaction(base, lower, upper)


def positive_truncation(base: Reaction) -> TruncatedReaction:
    """Freeze `base` at 0 from below: f(x, max(t, 0))."""
    return TruncatedReaction(base, 0.0, np.inf)


def negative_truncation(base: Reaction) -> TruncatedReaction:
    """Freeze `base` at 0 from above: f(x, min(t, 0))."""
    return TruncatedReaction(base, -np.inf, 0.0)


def tau_eps(eps: float, t):
    """Piecewise-linear cut-off: 0 below 0, t/eps on (0, eps), 1 above eps."""
    if not eps > 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")
    out = np.clip(np.asarray(t, dtype=float) / eps, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    max_ratio: float
    worst_x: float
    worst_t: float


def growth_check(r: Reaction, params, sample_count: int = 200) -> GrowthReport:
    """Sampled check of |f(x, t)| <= c0 (1 + |t|^(q-1)) on nodes x log-spaced t.

    Uses the declared budget (params.c0, params.q); t ranges over +-[1e-6, 1e4]
    and 0.  Sampled, so a pass is evidence, not proof.
    """
    h = (params.b - params.a) / (params.n + 1)
    x = params.a + h * np.arange(1, params.n + 1, dtype=float)
    k = max(int(sample_count) // 2, 2)
    pos = np.logspace(-6.0, 4.0, k)
    tgrid = np.concatenate([-pos[::-1], [0.0], pos])
    worst = (0.0, x[0], 0.0)
    for t in tgrid:
        vals = np.abs(np.atleast_1d(r.eval(x, np.full_like(x, t))))
        budget = params.c0 * (1.0 + abs(t) ** (params.q - 1.0))
        i = int(np.argmax(vals))
        ratio = float(vals[i]) / budget
        if ratio > worst[0]:
            worst = (ratio, float(x[i]), float(t))
    return GrowthReport(passed=worst[0] <= 1.0 + 1e-9, max_ratio=worst[0],
                        worst_x=worst[1], worst_t=worst[2])


def origin_slope(r: Reaction, x, p: float, t0: float = 1e-4):
    """Sampled two-sided slope f(x, +-t0)/phi_p(+-t0); returns (min, max)."""
    x = np.asarray(x, dtype=float)
    up = np.atleast_1d(r.eval(x, np.full_like(x, t0))) / t0 ** (p - 1.0)
    dn = np.atleast_1d(r.eval(x, np.full_like(x, -t0))) / (-(t0 ** (p - 1.0)))
    both = np.concatenate([up, dn])
    return float(np.min(both)), float(np.max(both))


def primitive_ratio(r: Reaction, x, p: float, tbig: float = 1e4) -> float:
    """Sampled asymptotic ratio max_x F(x, +-tbig)/|tbig|^p (H-style surrogate)."""
    x = np.asarray(x, dtype=float)
    vals = [
        np.max(np.atleast_1d(r.primitive(x, np.full_like(x, tv)))) / abs(tv) ** p
        for tv in (tbig, -tbig)
    ]
    return float(max(vals))
