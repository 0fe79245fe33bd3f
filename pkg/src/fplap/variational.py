"""Energy functional, minimization, Newton solves, and mountain-pass search.

The functional associated with a reaction f is

    Phi(u) = J(u) - h sum_i F(x_i, u_i),

whose gradient is h (A(u) - f(x, u)).  Solvers report the strong residual
r(u) = A(u) - f(x, u) in the sup norm; `tol` always refers to that quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from fplap import kernels, operator
from fplap.errors import ConvergenceError, DegeneratePathError, ParameterError
from fplap.mesh import Mesh, ProblemParams, check_grid
from fplap.reaction import FixedSource, Reaction

DEDUP_RTOL = 1e-6  # two states are the same solution when within this


@dataclass
class SolverOptions:
    """Shared solver knobs; defaults suit the desk-scale meshes (n <= 64)."""

    tol: float = 1e-10
    max_iter: int = 5000
    newton_max_iter: int = 80
    newton_switch: float = 1e-3  # residual level where Newton takes over
    step0: float = 1.0
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0
    seed: int = 0
    multistart: int = 8
    path_states: int = 17
    string_max_sweeps: int = 6000
    string_plateau: int = 60
    mp_noise: float = 0.05
    retries: int = 5

    def with_(self, **kw) -> "SolverOptions":
        return replace(self, **kw)


@dataclass
class Functional:
    """Phi(u) = J(u) - h sum F(x_i, u_i) for a fixed mesh/params/reaction."""

    mesh: Mesh
    params: ProblemParams
    reaction: Reaction

    def value(self, u) -> float:
        # hot path: skip the finiteness scan; NaN poisons every comparison
        arr = np.ascontiguousarray(u, dtype=np.float64)
        prim = np.sum(self.reaction.primitive(self.mesh.nodes, arr))
        jpart = kernels.energy(arr, self.mesh.kernel, self.mesh.tails, self.mesh.h,
                               self.params.p)
        return float(jpart) - self.mesh.h * float(prim)

    def residual(self, u) -> np.ndarray:
        """Strong-form residual A(u) - f(x, u)."""
        arr = np.ascontiguousarray(u, dtype=np.float64)
        au = kernels.apply_op(arr, self.mesh.kernel, self.mesh.tails, self.mesh.h,
                              self.params.p)
        return au - np.atleast_1d(self.reaction.eval(self.mesh.nodes, arr))

    def gradient(self, u) -> np.ndarray:
        return self.mesh.h * self.residual(u)

    def value_and_gradient(self, u):
        return self.value(u), self.gradient(u)

    def residual_matrix(self, u) -> np.ndarray:
        """Jacobian of u -> A(u) - f(x, u); the Hessian of Phi is h times this."""
        arr = check_grid(self.mesh, u)
        m = operator.jacobian(self.mesh, self.params, arr)
        return m - np.diag(np.atleast_1d(self.reaction.deriv_t(self.mesh.nodes, arr)))

    def hessian(self, u) -> np.ndarray:
        return self.mesh.h * self.residual_matrix(u)

    def second_derivative_quadratic(self, u, d) -> float:
        """<Hessian(u) d, d> in the h-weighted inner product (scaled by h)."""
        da = check_grid(self.mesh, d)
        return float(da @ (self.hessian(u) @ da))


def classify_sign(u, tol: float = 1e-8) -> str:
    """'zero', 'positive', 'negative', or 'nodal' with dead band tol."""
    arr = np.asarray(u, dtype=float)
    if arr.size == 0 or float(np.max(np.abs(arr))) <= tol:
        return "zero"
    has_pos = bool(np.any(arr > tol))
    has_neg = bool(np.any(arr < -tol))
    if has_pos and has_neg:
        return "nodal"
    return "positive" if has_pos else "negative"


def is_distinct(u, v, rtol: float = DEDUP_RTOL) -> bool:
    """True when u and v differ as solutions: ||u-v||_inf > rtol (1 + ||u||_inf)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(u - v))) > rtol * (1.0 + float(np.max(np.abs(u))))


@dataclass(frozen=True)
class SolveReport:
    """Solution candidate with recomputed certificates.

    residual_inf and energy are recomputed from u at construction rather
    than trusted from the solver loop.
    """

    u: np.ndarray
    residual_inf: float
    energy: float
    iterations: int
    classification: str
    ordering: Optional[tuple] = None  # (lower_ok, upper_ok) when bounds given


def make_report(func: Functional, u, iterations: int, lower=None, upper=None,
                order_tol: float = 1e-8) -> SolveReport:
    arr = check_grid(func.mesh, u).copy()
    arr.setflags(write=False)
    ordering = None
    if lower is not None or upper is not None:
        lo_ok = True if lower is None else bool(np.min(arr - lower) >= -order_tol)
        hi_ok = True if upper is None else bool(np.min(upper - arr) >= -order_tol)
        ordering = (lo_ok, hi_ok)
    return SolveReport(
        u=arr,
        residual_inf=float(np.max(np.abs(func.residual(arr)))),
        energy=func.value(arr),
        iterations=int(iterations),
        classification=classify_sign(arr),
        ordering=ordering,
    )


def _newton_direction(mat: np.ndarray, res: np.ndarray) -> np.ndarray:
    """Solve mat d = -res, falling back to least squares when singular."""
    try:
        d = np.linalg.solve(mat, -res)
        if np.all(np.isfinite(d)):
            return d
    except np.linalg.LinAlgError:
        pass
    d, *_ = np.linalg.lstsq(mat, -res, rcond=None)
    return d


def minimize(func: Functional, start, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Descent with backtracking, then Newton polish, on Phi.

    Stops when ||A(u) - f(x, u)||_inf <= opts.tol.  The recorded energy is
    nonincreasing and never exceeds the starting energy.
    """
    u = check_grid(func.mesh, start).copy()
    res = func.residual(u)
    rn = float(np.max(np.abs(res)))
    if rn <= opts.tol:
        return make_report(func, u, 0)
    val = func.value(u)
    alpha = opts.step0
    iters = 0

    for _ in range(opts.max_iter):
        if rn <= max(opts.tol, opts.newton_switch):
            break
        g = func.mesh.h * res
        gsq = float(g @ g)
        accepted = False
        while alpha > 1e-18:
            trial = u - alpha * g
            tval = func.value(trial)
            if tval <= val - opts.armijo * alpha * gsq:
                accepted = True
                break
            alpha *= opts.shrink
        if not accepted:
            break  # descent stalled at machine scale; let Newton finish
        u, val = trial, tval
        res = func.residual(u)
        rn = float(np.max(np.abs(res)))
        alpha *= opts.grow
        iters += 1
        if rn <= opts.tol:
            return make_report(func, u, iters)

    # Newton polish; steps pass on energy decrease or on residual decrease,
    # since near the minimum the energy comparison drowns in roundoff
    for _ in range(opts.newton_max_iter):
        if rn <= opts.tol:
            return make_report(func, u, iters)
        d = _newton_direction(func.residual_matrix(u), res)
        g = func.mesh.h * res
        slope = float(g @ d)
        if slope >= 0.0:
            d, slope = -g, -float(g @ g)
        noise = 1e-14 * (1.0 + abs(val))
        beta, accepted = 1.0, False
        while beta > 1e-18:
            trial = u + beta * d
            tres = func.residual(trial)
            tnr = float(np.max(np.abs(tres)))
            tval = func.value(trial)
            if (tval <= val + opts.armijo * beta * slope + noise
                    or tnr <= (1.0 - opts.armijo * beta) * rn):
                accepted = True
                break
            beta *= opts.shrink
        if not accepted:
            break
        u, val, res, rn = trial, tval, tres, tnr
        iters += 1

    if rn <= opts.tol:
        return make_report(func, u, iters)
    raise ConvergenceError(
        f"minimize stalled at residual {rn:.3e} (target {opts.tol:.1e}) after {iters} iterations",
        best=make_report(func, u, iters),
    )


def newton_solve(func: Functional, start, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Damped Newton on the residual system A(u) = f(x, u).

    Line search decreases ||r||_inf, so saddle points are admissible limits.
    Singular linearizations go through least squares, then a diagonal shift.
    """
    u = check_grid(func.mesh, start).copy()
    res = func.residual(u)
    rn = float(np.max(np.abs(res)))
    for it in range(opts.newton_max_iter):
        if rn <= opts.tol:
            return make_report(func, u, it)
        mat = func.residual_matrix(u)
        d = _newton_direction(mat, res)
        accepted = False
        for shift_scale in (None, 1e-8, 1e-4, 1.0, 1e2):
            if shift_scale is not None:
                lam = shift_scale * max(1.0, float(np.trace(mat)) / mat.shape[0])
                d = _newton_direction(mat + lam * np.eye(mat.shape[0]), res)
            beta = 1.0
            while beta > 2.0**-40:
                trial = u + beta * d
                tres = func.residual(trial)
                trn = float(np.max(np.abs(tres)))
                if trn <= (1.0 - opts.armijo * beta) * rn:
                    accepted = True
                    break
                beta *= opts.shrink
            if accepted:
                break
        if not accepted:
            raise ConvergenceError(
                f"newton_solve stuck at residual {rn:.3e}; "
                f"linearization condition number {np.linalg.cond(mat):.3e}",
                best=make_report(func, u, it),
            )
        u, res, rn = trial, tres, trn
        if float(np.max(np.abs(u))) > 1e10:
            raise ConvergenceError("newton_solve diverged (iterate norm above 1e10)",
                                   best=make_report(func, u, it))
    if rn <= opts.tol:
        return make_report(func, u, opts.newton_max_iter)
    raise ConvergenceError(
        f"newton_solve hit the iteration cap at residual {rn:.3e}",
        best=make_report(func, u, opts.newton_max_iter),
    )


@dataclass(frozen=True)
class PathState:
    """A discrete path of grid functions with recomputed energies."""

    states: np.ndarray  # shape (m, n)
    energies: np.ndarray  # shape (m,)
    max_index: int


def make_path_state(func: Functional, states) -> PathState:
    arr = np.array([check_grid(func.mesh, s) for s in states])
    energies = np.array([func.value(s) for s in arr])
    arr.setflags(write=False)
    energies.setflags(write=False)
    return PathState(states=arr, energies=energies, max_index=int(np.argmax(energies)))


def _reparametrize(states: np.ndarray, h: float) -> np.ndarray:
    """Redistribute interior states to equal chord length (endpoints pinned)."""
    m = states.shape[0]
    seg = np.sqrt(h * np.sum(np.diff(states, axis=0) ** 2, axis=1))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0.0:
        return states
    targets = np.linspace(0.0, total, m)
    out = np.empty_like(states)
    out[0], out[-1] = states[0], states[-1]
    for col in range(states.shape[1]):
        out[1:-1, col] = np.interp(targets[1:-1], arc, states[:, col])
    return out


def mountain_pass(func: Functional, a, b, opts: SolverOptions = SolverOptions()):
    """String method between two states, then Newton polish of the max state.

    Starts from the straight path perturbed by seeded noise, relaxes all
    interior states by backtracked descent on Phi with equal-chord
    reparametrization each sweep, and polishes the highest-energy state to a
    critical point.  Returns (SolveReport, PathState); the polished state
    must be distinct from both endpoints (else DegeneratePathError).
    """
    a = check_grid(func.mesh, a).copy()
    b = check_grid(func.mesh, b).copy()
    if not is_distinct(a, b):
        raise ParameterError("mountain_pass endpoints coincide")
    m = max(int(opts.path_states), 5)
    rng = np.random.default_rng(opts.seed)
    tau = np.linspace(0.0, 1.0, m)
    states = (1.0 - tau)[:, None] * a[None, :] + tau[:, None] * b[None, :]
    scale = max(float(np.max(np.abs(a - b))), 1.0)
    bump = np.sin(np.pi * tau)[:, None]
    states[1:-1] += (opts.mp_noise * scale * bump * rng.standard_normal(states.shape))[1:-1]

    steps = np.full(m, opts.step0)
    end_max = max(func.value(a), func.value(b))
    end_tol = 1e-12 * max(1.0, abs(end_max))

    def try_polish(state, level_cap):
        # accept only critical points consistent with what the string reached:
        # not an endpoint, not below the endpoint levels, not above the best
        # string level by more than the observed sweep-to-sweep wobble
        try:
            rep = newton_solve(func, state, opts)
        except ConvergenceError:
            return None
        if not (is_distinct(rep.u, a) and is_distinct(rep.u, b)):
            return None
        if rep.energy < end_max - end_tol or rep.energy > level_cap:
            return None
        return rep

    report = None
    window = []
    level_min = np.inf
    cooldown = 0
    sweeps = 0
    energies = np.array([func.value(s) for s in states])
    for sweeps in range(1, opts.string_max_sweeps + 1):
        for k in range(1, m - 1):
            val = energies[k]
            g = func.gradient(states[k])
            gsq = float(g @ g)
            if gsq == 0.0:
                continue
            while steps[k] > 1e-18:
                trial = states[k] - steps[k] * g
                tval = func.value(trial)
                if tval <= val - opts.armijo * steps[k] * gsq:
                    states[k] = trial
                    steps[k] *= opts.grow
                    break
                steps[k] *= opts.shrink
        states = _reparametrize(states, func.mesh.h)
        energies = np.array([func.value(s) for s in states])
        kmax = int(np.argmax(energies))
        cur_max = float(energies[kmax])
        window.append(cur_max)
        if len(window) > opts.string_plateau:
            window.pop(0)
        level_min = min(level_min, cur_max)
        cooldown = max(0, cooldown - 1)
        at_checkpoint = (len(window) == opts.string_plateau
                         and sweeps % opts.string_plateau == 0)
        res_trigger = False
        if cooldown == 0 and not at_checkpoint:
            res_inf = float(np.max(np.abs(func.residual(states[kmax]))))
            res_trigger = res_inf <= opts.newton_switch
        if at_checkpoint or res_trigger:
            cooldown = 10
            band = (max(window) - min(window)) + 1e-9 * max(1.0, abs(cur_max))
            report = try_polish(states[kmax].copy(), level_min + band)
            if report is not None:
                break
    if report is None:
        # out of sweeps: polish unconditionally and let the guards decide
        kmax = int(np.argmax(energies))
        report = newton_solve(func, states[kmax].copy(), opts)
        for endpoint in (a, b):
            if not is_distinct(report.u, endpoint):
                raise DegeneratePathError(
                    "mountain-pass path collapsed onto an endpoint", best=report
                )
        if report.energy < end_max - end_tol:
            raise DegeneratePathError(
                f"polished state energy {report.energy:.6g} fell below the endpoint "
                f"level {end_max:.6g}", best=report,
            )
    kmax = int(np.argmax([func.value(s) for s in states]))
    states[kmax] = report.u
    path = make_path_state(func, states)
    report = make_report(func, report.u, iterations=sweeps)
    return report, path


def solve_rhs(mesh: Mesh, params: ProblemParams, g,
              opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Solve A(u) = g for a fixed right-hand side.

    The problem is strictly convex, so the line-searched Newton phase is
    globally convergent and the descent phase is skipped.
    """
    func = Functional(mesh, params, FixedSource(np.asarray(g, dtype=float)))
    return minimize(func, np.zeros(mesh.n), opts.with_(newton_switch=float("inf")))
