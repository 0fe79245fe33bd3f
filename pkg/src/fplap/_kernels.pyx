# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise kernels; see `_kernels_py` for the reference NumPy port.

Loops run row-major with the j-index innermost so the reduction order is
fixed and runs are reproducible.  p == 2 takes dedicated loops: libm pow
with a fractional exponent costs more than the whole remaining iteration.
"""

import numpy as np

from libc.math cimport fabs, pow


cdef inline double phi(double t, double pm1) nogil:
    if t >= 0.0:
        return pow(t, pm1)
    return -pow(-t, pm1)


cdef inline double dphi(double t, double p, double delta) nogil:
    if p >= 2.0:
        return (p - 1.0) * pow(fabs(t), p - 2.0)
    return (p - 1.0) * pow(t * t + delta * delta, 0.5 * (p - 2.0))


def energy(const double[::1] u, const double[:, ::1] w, const double[::1] tails,
           double h, double p):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, d
    if p == 2.0:
        for i in range(n):
            for j in range(n):
                if j != i:
                    d = u[i] - u[j]
                    acc += h * h * d * d * w[i, j]
            acc += h * tails[i] * u[i] * u[i]
        return acc / 2.0
    for i in range(n):
        for j in range(n):
            if j != i:
                acc += h * h * pow(fabs(u[i] - u[j]), p) * w[i, j]
        acc += h * tails[i] * pow(fabs(u[i]), p)
    return acc / p


def apply_op(const double[::1] u, const double[:, ::1] w, const double[::1] tails,
             double h, double p):
    cdef Py_ssize_t n = u.shape[0]
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double s, pm1 = p - 1.0
    if p == 2.0:
        for i in range(n):
            s = 0.0
            for j in range(n):
                if j != i:
                    s += (u[i] - u[j]) * w[i, j]
            o[i] = 2.0 * h * s + tails[i] * u[i]
        return out
    for i in range(n):
        s = 0.0
        for j in range(n):
            if j != i:
                s += phi(u[i] - u[j], pm1) * w[i, j]
        o[i] = 2.0 * h * s + tails[i] * phi(u[i], pm1)
    return out


def pair_dual(const double[::1] u, const double[::1] v, const double[:, ::1] w,
              const double[::1] tails, double h, double p):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, pm1 = p - 1.0
    if p == 2.0:
        for i in range(n):
            for j in range(n):
                if j != i:
                    acc += h * h * (u[i] - u[j]) * (v[i] - v[j]) * w[i, j]
            acc += h * tails[i] * u[i] * v[i]
        return acc
    for i in range(n):
        for j in range(n):
            if j != i:
                acc += h * h * phi(u[i] - u[j], pm1) * (v[i] - v[j]) * w[i, j]
        acc += h * tails[i] * phi(u[i], pm1) * v[i]
    return acc


def hess_action(const double[::1] u, const double[::1] v, const double[:, ::1] w,
                const double[::1] tails, double h, double p, double delta):
    cdef Py_ssize_t n = u.shape[0]
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double s
    if p == 2.0:
        for i in range(n):
            s = 0.0
            for j in range(n):
                if j != i:
                    s += (v[i] - v[j]) * w[i, j]
            o[i] = 2.0 * h * s + tails[i] * v[i]
        return out
    for i in range(n):
        s = 0.0
        for j in range(n):
            if j != i:
                s += dphi(u[i] - u[j], p, delta) * (v[i] - v[j]) * w[i, j]
        o[i] = 2.0 * h * s + tails[i] * dphi(u[i], p, delta) * v[i]
    return out


def hess_matrix(const double[::1] u, const double[:, ::1] w, const double[::1] tails,
                double h, double p, double delta):
    cdef Py_ssize_t n = u.shape[0]
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double g, diag
    if p == 2.0:
        for i in range(n):
            diag = 0.0
            for j in range(n):
                if j != i:
                    o[i, j] = -2.0 * h * w[i, j]
                    diag += w[i, j]
            o[i, i] = 2.0 * h * diag + tails[i]
        return out
    for i in range(n):
        diag = 0.0
        for j in range(n):
            if j != i:
                g = dphi(u[i] - u[j], p, delta) * w[i, j]
                o[i, j] = -2.0 * h * g
                diag += g
        o[i, i] = 2.0 * h * diag + tails[i] * dphi(u[i], p, delta)
    return out
