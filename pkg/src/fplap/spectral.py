"""Weighted principal eigenpair and a path-minimax second eigenvalue.

The discrete eigenproblem is A(u) = lam * rho * phi_p(u) with the
normalization h sum_i rho_i |u_i|^p = 1.  The principal pair minimizes the
Rayleigh quotient p J(u) / (h sum rho |u|^p); the second eigenvalue is
estimated as the relaxed maximum of the seminorm energy along paths joining
u1 to -u1 on the unit L^p sphere (string method).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fplap import kernels, operator
from fplap.errors import ConvergenceError, InternalCheckError, ParameterError
from fplap.mesh import Mesh, ProblemParams, check_grid
from fplap.operator import dphi_p, phi_p
from fplap.variational import PathState, SolverOptions


@dataclass(frozen=True)
class EigenResult:
    """Eigenpair with recomputed certificates.

    residual = ||A(u) - lam rho phi_p(u)||_inf, normalization = h sum rho|u|^p.
    """

    lam: float
    u: np.ndarray
    residual: float
    normalization: float
    iterations: int


def _weight(mesh: Mesh, rho) -> np.ndarray:
    if rho is None:
        return np.ones(mesh.n)
    arr = check_grid(mesh, rho)
    if np.any(arr < 0.0) or not np.any(arr > 0.0):
        raise ParameterError("weight must be nonnegative and not identically zero")
    return arr


def _lp_norm_p(mesh: Mesh, rho, u, p) -> float:
    return mesh.h * float(np.sum(rho * np.abs(u) ** p))


def _project(mesh: Mesh, rho, u, p) -> np.ndarray:
    d = _lp_norm_p(mesh, rho, u, p)
    if d <= 0.0:
        raise ConvergenceError("state collapsed to the weight's null set during projection")
    return u / d ** (1.0 / p)


def _eig_residual(mesh, params, rho, u, lam) -> np.ndarray:
    return operator.apply(mesh, params, u) - lam * rho * phi_p(u, params.p)


def _eig_newton(mesh, params, rho, u, lam, tol, max_iter=50):
    """Newton on the extended system (eigen-residual, normalization - 1)."""
    n = mesh.n
    p = params.p
    for it in range(max_iter):
        res = _eig_residual(mesh, params, rho, u, lam)
        con = _lp_norm_p(mesh, rho, u, p) - 1.0
        gn = max(float(np.max(np.abs(res))), abs(con))
        if gn <= tol:
            return u, lam, it
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = operator.jacobian(mesh, params, u) - lam * np.diag(rho * dphi_p(u, p))
        jac[:n, n] = -rho * phi_p(u, p)
        jac[n, :n] = p * mesh.h * rho * phi_p(u, p)
        rhs = -np.concatenate([res, [con]])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, rhs, rcond=None)
        beta, accepted = 1.0, False
        while beta > 2.0**-40:
            ut = u + beta * step[:n]
            lt = lam + beta * step[n]
            rt = _eig_residual(mesh, params, rho, ut, lt)
            ct = _lp_norm_p(mesh, rho, ut, p) - 1.0
            if max(float(np.max(np.abs(rt))), abs(ct)) <= (1.0 - 1e-4 * beta) * gn:
                accepted = True
                break
            beta *= 0.5
        if not accepted:
            raise ConvergenceError(f"eigen-Newton stalled at residual {gn:.3e}")
        u, lam = ut, lt
    res = _eig_residual(mesh, params, rho, u, lam)
    con = _lp_norm_p(mesh, rho, u, p) - 1.0
    if max(float(np.max(np.abs(res))), abs(con)) <= tol:
        return u, lam, max_iter
    raise ConvergenceError("eigen-Newton hit its iteration cap")


def principal_eigenpair(mesh: Mesh, params: ProblemParams, rho=None,
                        opts: SolverOptions = SolverOptions()) -> EigenResult:
    """Smallest weighted eigenvalue and its normalized positive eigenfunction.

    Projected Rayleigh descent from the positive constant state, then Newton
    polish on the extended system.  Line-search ties resolve toward the
    smaller step (acceptance is strict decrease).
    """
    rho = _weight(mesh, rho)
    p = params.p
    u = _project(mesh, rho, np.ones(mesh.n), p)
    lam = p * operator.energy(mesh, params, u)
    alpha = opts.step0
    iters = 0
    for _ in range(opts.max_iter):
        g = _eig_residual(mesh, params, rho, u, lam)
        if float(np.max(np.abs(g))) <= opts.newton_switch:
            break
        accepted = False
        while alpha > 1e-18:
            trial = _project(mesh, rho, u - alpha * g, p)
            tlam = p * operator.energy(mesh, params, trial)
            if tlam < lam:
                accepted = True
                break
            alpha *= opts.shrink
        if not accepted:
            break
        u, lam = trial, tlam
        alpha *= opts.grow
        iters += 1

    tol = min(opts.tol, 1e-10)
    u, lam, its2 = _eig_newton(mesh, params, rho, u, lam, tol)
    if u[int(np.argmax(np.abs(u)))] < 0.0:
        u = -u
    if lam <= 0.0 or np.min(u) <= 0.0:
        raise ConvergenceError(
            "principal eigenpair solve did not land on a positive eigenfunction"
        )
    res = float(np.max(np.abs(_eig_residual(mesh, params, rho, u, lam))))
    u = u.copy()
    u.setflags(write=False)
    return EigenResult(lam=float(lam), u=u, residual=res,
                       normalization=_lp_norm_p(mesh, rho, u, p),
                       iterations=iters + its2)


def second_eigenvalue_minimax(mesh: Mesh, params: ProblemParams,
                              opts: SolverOptions = SolverOptions(), u1=None):
    """Estimate the second eigenvalue by relaxing paths u1 -> -u1 on the sphere.

    Returns (estimate, PathState).  The estimate is the maximum seminorm
    energy along the relaxed path (an upper bound within the sampled path
    class), sharpened by Newton-polishing the max state onto an eigenpair
    when that succeeds.
    """
    if mesh.n < 2:
        raise ParameterError("second eigenvalue needs at least 2 nodes")
    p = params.p
    ones = np.ones(mesh.n)
    if u1 is None:
        u1 = principal_eigenpair(mesh, params, None, opts).u
    lam1 = p * operator.energy(mesh, params, u1)
    rng = np.random.default_rng(opts.seed)
    m = max(int(opts.path_states), 5)

    # transverse seed state: odd-reflected profile plus a little noise
    center = 0.5 * (mesh.nodes[0] + mesh.nodes[-1])
    w = u1 * np.sign(mesh.nodes - center)
    w = w + 0.05 * rng.standard_normal(mesh.n) * float(np.max(np.abs(u1)))
    w = _project(mesh, ones, w, p)

    tau = np.linspace(0.0, 1.0, m)
    states = np.empty((m, mesh.n))
    for k in range(m):
        states[k] = _project(mesh, ones,
                             np.cos(np.pi * tau[k]) * u1 + np.sin(np.pi * tau[k]) * w, p)
    states[0], states[-1] = u1.copy(), -u1

    def ray(u):
        return p * float(kernels.energy(u, mesh.kernel, mesh.tails, mesh.h, p))

    def try_polish(state, level, level_cap):
        # accept the polished pair only if it sits strictly above lam1 and is
        # consistent with the level the string reached (guards against sliding
        # to +-u1 or onto a higher eigenpair)
        try:
            up, lamp, _ = _eig_newton(mesh, params, ones, state, level,
                                      min(opts.tol, 1e-10))
        except ConvergenceError:
            return None
        if lamp <= lam1 * (1.0 + 1e-9) or lamp > level_cap:
            return None
        if abs(lamp - level) > 0.5 * max(level, 1.0):
            return None
        return up, float(lamp)

    steps = np.full(m, opts.step0)
    polished = None
    window = []
    level_min = np.inf
    cooldown = 0
    energies = np.array([ray(s) for s in states])
    for sweeps in range(1, opts.string_max_sweeps + 1):
        for k in range(1, m - 1):
            u = states[k]
            mu = energies[k]
            r = _eig_residual(mesh, params, ones, u, mu)
            while steps[k] > 1e-18:
                trial = _project(mesh, ones, u - steps[k] * r, p)
                if ray(trial) < mu:
                    states[k] = trial
                    steps[k] *= opts.grow
                    break
                steps[k] *= opts.shrink
        # equal-chord reparametrization, then back onto the sphere
        seg = np.sqrt(mesh.h * np.sum(np.diff(states, axis=0) ** 2, axis=1))
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        if arc[-1] > 0.0:
            targets = np.linspace(0.0, arc[-1], m)
            new = states.copy()
            for col in range(mesh.n):
                new[1:-1, col] = np.interp(targets[1:-1], arc, states[:, col])
            for k in range(1, m - 1):
                new[k] = _project(mesh, ones, new[k], p)
            states = new
        energies = np.array([ray(s) for s in states])
        kmax = int(np.argmax(energies))
        cur = float(energies[kmax])
        window.append(cur)
        if len(window) > opts.string_plateau:
            window.pop(0)
        level_min = min(level_min, cur)
        cooldown = max(0, cooldown - 1)
        at_checkpoint = (len(window) == opts.string_plateau
                         and sweeps % opts.string_plateau == 0)
        res_trigger = False
        if cooldown == 0 and not at_checkpoint:
            res = _eig_residual(mesh, params, ones, states[kmax], cur)
            res_trigger = float(np.max(np.abs(res))) <= opts.newton_switch
        if at_checkpoint or res_trigger:
            cooldown = 10
            band = (max(window) - min(window)) + 1e-9 * max(1.0, abs(cur))
            polished = try_polish(states[kmax].copy(), cur, level_min + band)
            if polished is not None:
                break

    kmax = int(np.argmax(energies))
    estimate = float(energies[kmax])
    if polished is None:
        # out of sweeps: one unconditional attempt against the string level
        polished = try_polish(states[kmax].copy(), estimate,
                              estimate * (1.0 + 1e-9))
    if polished is not None:
        states[kmax] = polished[0]
        estimate = polished[1]

    energies = np.array([p * operator.energy(mesh, params, s) for s in states])
    for arr in (states, energies):
        arr.setflags(write=False)
    path = PathState(states=states, energies=energies, max_index=int(np.argmax(energies)))
    if estimate <= lam1 * (1.0 + 1e-12):
        raise ConvergenceError(
            f"second-eigenvalue estimate {estimate:.6g} fell to the principal level {lam1:.6g}"
        )
    return estimate, path


@dataclass(frozen=True)
class WeightCompareReport:
    lam_rho: float
    lam_rho_tilde: float
    gap: float


def weight_compare(mesh: Mesh, params: ProblemParams, rho, rho_tilde,
                   opts: SolverOptions = SolverOptions()) -> WeightCompareReport:
    """Strict monotonicity of lam1 under weight domination (rho_tilde <= rho).

    Requires rho_tilde <= rho node-wise with strict inequality somewhere;
    the resulting gap lam1(rho_tilde) - lam1(rho) must be positive.
    """
    r1 = _weight(mesh, rho)
    r2 = _weight(mesh, rho_tilde)
    if np.any(r2 > r1):
        raise ParameterError("weight_compare needs rho_tilde <= rho node-wise")
    if not np.any(r2 < r1):
        raise ParameterError("weight_compare needs rho_tilde != rho somewhere")
    lam_rho = principal_eigenpair(mesh, params, r1, opts).lam
    lam_tilde = principal_eigenpair(mesh, params, r2, opts).lam
    gap = lam_tilde - lam_rho
    if gap <= 1e-10 * max(1.0, lam_rho):
        raise InternalCheckError(
            f"weight monotonicity gap {gap:.3e} not strictly positive"
        )
    return WeightCompareReport(lam_rho=float(lam_rho), lam_rho_tilde=float(lam_tilde),
                               gap=float(gap))
