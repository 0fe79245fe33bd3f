"""Pure NumPy implementations of the pairwise kernels.

Mirrors the compiled extension in `_kernels.pyx`.  All arrays are float64;
`w` is the dense pair-kernel matrix with zero diagonal, `tails` the exterior
tail weights.  Reduction order is fixed by NumPy's axis sums, so results are
deterministic for a given input.  p == 2 avoids pow and, where possible,
forming the pairwise difference matrix at all (w has zero diagonal, so the
matvec identities need no diagonal exclusion).
"""

import numpy as np


def _phi(t, pm1):
    # sign(t) * |t|^(p-1); safe at t = 0 for any p > 1
    return np.sign(t) * np.abs(t) ** pm1


def _dphi(t, p, delta):
    if p == 2.0:
        return np.ones_like(t)
    if p > 2.0:
        return (p - 1.0) * np.abs(t) ** (p - 2.0)
    # p < 2: |t|^(p-2) blows up at t = 0, smooth it at scale delta
    return (p - 1.0) * (t * t + delta * delta) ** (0.5 * (p - 2.0))


def energy(u, w, tails, h, p):
    if p == 2.0:
        d = u[:, None] - u[None, :]
        pair_part = h * h * float(np.sum(d * d * w))
        tail_part = h * float(np.sum(tails * u * u))
        return (pair_part + tail_part) / 2.0
    d = u[:, None] - u[None, :]
    pair_part = h * h * float(np.sum(np.abs(d) ** p * w))
    tail_part = h * float(np.sum(tails * np.abs(u) ** p))
    return (pair_part + tail_part) / p


def apply_op(u, w, tails, h, p):
    if p == 2.0:
        return 2.0 * h * (w.sum(axis=1) * u - w @ u) + tails * u
    d = u[:, None] - u[None, :]
    return 2.0 * h * np.sum(_phi(d, p - 1.0) * w, axis=1) + tails * _phi(u, p - 1.0)


def pair_dual(u, v, w, tails, h, p):
    if p == 2.0:
        row = w.sum(axis=1)
        pair_part = 2.0 * h * h * (float(u @ (row * v)) - float(u @ (w @ v)))
        return pair_part + h * float(np.sum(tails * u * v))
    du = u[:, None] - u[None, :]
    dv = v[:, None] - v[None, :]
    pair_part = h * h * float(np.sum(_phi(du, p - 1.0) * dv * w))
    tail_part = h * float(np.sum(tails * _phi(u, p - 1.0) * v))
    return pair_part + tail_part


def hess_action(u, v, w, tails, h, p, delta):
    if p == 2.0:
        return 2.0 * h * (w.sum(axis=1) * v - w @ v) + tails * v
    d = u[:, None] - u[None, :]
    g = _dphi(d, p, delta) * w
    row = np.sum(g, axis=1)
    return 2.0 * h * (row * v - g @ v) + tails * _dphi(u, p, delta) * v


def hess_matrix(u, w, tails, h, p, delta):
    if p == 2.0:
        out = -2.0 * h * w.copy()
        np.fill_diagonal(out, 2.0 * h * w.sum(axis=1) + tails)
        return out
    d = u[:, None] - u[None, :]
    g = _dphi(d, p, delta) * w
    out = -2.0 * h * g
    np.fill_diagonal(out, 2.0 * h * np.sum(g, axis=1) + tails * _dphi(u, p, delta))
    return out
