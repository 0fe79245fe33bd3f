"""Sub-supersolution machinery: ordered intervals, extremal and nodal solutions.

A supersolution satisfies A(u)_i - f(x_i, u_i) >= 0 node-wise (subsolution:
<= 0); checks are residual-sign tests with a tolerance.  Solutions inside an
ordered interval are found by minimizing the truncated functional; extremal
ones by monotone iteration of the shifted problem

    A(w) + sigma phi_p(w) = f~(x, u_k) + sigma phi_p(u_k),

whose iterates are ordered and converge to the smallest (resp. biggest)
solution in the interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from fplap import operator
from fplap.errors import (ConvergenceError, DegeneracyError, DegeneratePathError,
                          InternalCheckError, NotFoundError, ParameterError)
from fplap.mesh import Mesh, ProblemParams, check_grid, weighted_sup
from fplap.operator import phi_p
from fplap.reaction import (Reaction, ShiftedSource, interval_truncation,
                            positive_truncation)
from fplap.spectral import principal_eigenpair, second_eigenvalue_minimax
from fplap.variational import (Functional, SolverOptions, SolveReport, classify_sign,
                               is_distinct, make_report, minimize, mountain_pass,
                               newton_solve)

ORDER_TOL = 1e-8  # default tolerance for node-wise ordering assertions


def sign_classify(u, tol: float = 1e-8) -> str:
    """'zero', 'positive', 'negative', or 'nodal' with dead band tol."""
    return classify_sign(u, tol)


@dataclass(frozen=True)
class CheckReport:
    ok: bool
    margin: float
    worst_node: int


def check_supersolution(mesh: Mesh, params: ProblemParams, r: Reaction, u,
                        tol: float = ORDER_TOL) -> CheckReport:
    """Node-wise residual sign test: min_i (A(u) - f(x, u))_i >= -tol."""
    arr = check_grid(mesh, u)
    res = operator.apply(mesh, params, arr) - np.atleast_1d(r.eval(mesh.nodes, arr))
    i = int(np.argmin(res))
    return CheckReport(ok=bool(res[i] >= -tol), margin=float(res[i]), worst_node=i)


def check_subsolution(mesh: Mesh, params: ProblemParams, r: Reaction, u,
                      tol: float = ORDER_TOL) -> CheckReport:
    """Node-wise residual sign test: max_i (A(u) - f(x, u))_i <= tol."""
    arr = check_grid(mesh, u)
    res = operator.apply(mesh, params, arr) - np.atleast_1d(r.eval(mesh.nodes, arr))
    i = int(np.argmax(res))
    return CheckReport(ok=bool(res[i] <= tol), margin=float(res[i]), worst_node=i)


def meet(u, v) -> np.ndarray:
    """Node-wise minimum (preserves supersolutions)."""
    return np.minimum(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def join(u, v) -> np.ndarray:
    """Node-wise maximum (preserves subsolutions)."""
    return np.maximum(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


@dataclass(frozen=True)
class IntervalPair:
    """Ordered subsolution/supersolution pair (validated at construction)."""

    lower: np.ndarray
    upper: np.ndarray


def interval_pair(mesh: Mesh, params: ProblemParams, r: Reaction, lower, upper,
                  tol: float = ORDER_TOL) -> IntervalPair:
    lo = check_grid(mesh, lower).copy()
    hi = check_grid(mesh, upper).copy()
    bad = np.nonzero(lo > hi)[0]
    if bad.size:
        raise ParameterError(f"interval violates lower <= upper first at node {bad[0]}")
    sub = check_subsolution(mesh, params, r, lo, tol)
    if not sub.ok:
        raise ParameterError(
            f"lower bound fails the subsolution check: margin {sub.margin:.3e} "
            f"at node {sub.worst_node}"
        )
    sup = check_supersolution(mesh, params, r, hi, tol)
    if not sup.ok:
        raise ParameterError(
            f"upper bound fails the supersolution check: margin {sup.margin:.3e} "
            f"at node {sup.worst_node}"
        )
    lo.setflags(write=False)
    hi.setflags(write=False)
    return IntervalPair(lower=lo, upper=hi)


def _assert_contained(u, pair: IntervalPair, tol: float, context: str):
    below = float(np.min(u - pair.lower))
    above = float(np.min(pair.upper - u))
    if below < -tol or above < -tol:
        raise InternalCheckError(
            f"{context}: solution left its interval (lower margin {below:.3e}, "
            f"upper margin {above:.3e}); discrete comparison breakdown"
        )


def interval_solve(mesh: Mesh, params: ProblemParams, r: Reaction, pair: IntervalPair,
                   opts: SolverOptions = SolverOptions()) -> SolveReport:
    """A solution inside the ordered interval, via truncated-energy minimization.

    The report's residual is recomputed against the untruncated reaction.
    """
    trunc = interval_truncation(r, pair.lower, pair.upper)
    tfunc = Functional(mesh, params, trunc)
    start = 0.5 * (pair.lower + pair.upper)
    rep = minimize(tfunc, start, opts)
    scale = 1.0 + max(float(np.max(np.abs(pair.lower))), float(np.max(np.abs(pair.upper))))
    _assert_contained(rep.u, pair, 10.0 * ORDER_TOL * scale, "interval_solve")
    return make_report(Functional(mesh, params, r), rep.u, rep.iterations,
                       lower=pair.lower, upper=pair.upper)


def _monotone_shift(mesh: Mesh, params: ProblemParams, trunc: Reaction,
                    pair: IntervalPair) -> float:
    """Shift sigma making t -> f~(x, t) + sigma phi_p(t) sampled-nondecreasing."""
    tlo = float(np.min(pair.lower))
    thi = float(np.max(pair.upper))
    tgrid = np.linspace(tlo, thi, 129)
    dmin = min(
        float(np.min(np.atleast_1d(trunc.deriv_t(mesh.nodes, np.full(mesh.n, t)))))
        for t in tgrid
    )
    sigma = 1.1 * max(0.0, -dmin)
    if sigma == 0.0:
        return 0.0
    p = params.p
    for _ in range(60):
        slopes = [
            float(np.min(np.atleast_1d(trunc.deriv_t(mesh.nodes, np.full(mesh.n, t))))
                  + sigma * operator.dphi_p(t, p))
            for t in tgrid
        ]
        if min(slopes) >= 0.0:
            return sigma
        sigma *= 2.0
    raise ConvergenceError("could not find a monotonizing shift for the interval")


def minimal_solution(mesh: Mesh, params: ProblemParams, r: Reaction, pair: IntervalPair,
                     opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Smallest solution in the interval, by monotone iteration from the lower bound.

    Iterates are node-wise nondecreasing (asserted); the limit is Newton
    polished on the untruncated system.
    """
    trunc = interval_truncation(r, pair.lower, pair.upper)
    sigma = _monotone_shift(mesh, params, trunc, pair)
    p = params.p
    inner_opts = opts.with_(newton_switch=float("inf"), tol=min(opts.tol * 0.1, 1e-11))
    u = pair.lower.copy()
    converged = False
    iters = 0
    for iters in range(1, opts.max_iter + 1):
        rhs = np.atleast_1d(trunc.eval(mesh.nodes, u)) + sigma * phi_p(u, p)
        inner = minimize(Functional(mesh, params, ShiftedSource(rhs, sigma, p)), u,
                         inner_opts)
        w = inner.u
        drop = float(np.min(w - u))
        if drop < -1e-8:
            raise InternalCheckError(
                f"monotone iteration lost ordering (step {iters}, min increment {drop:.3e})"
            )
        delta = float(np.max(np.abs(w - u)))
        u = w
        if delta <= opts.tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"monotone iteration did not stabilize within {opts.max_iter} steps",
            best=make_report(Functional(mesh, params, r), u, iters),
        )
    rep = newton_solve(Functional(mesh, params, r), u, opts)
    scale = 1.0 + max(float(np.max(np.abs(pair.lower))), float(np.max(np.abs(pair.upper))))
    _assert_contained(rep.u, pair, 10.0 * ORDER_TOL * scale, "minimal_solution")
    return make_report(Functional(mesh, params, r), rep.u, iters + rep.iterations,
                       lower=pair.lower, upper=pair.upper)


def maximal_solution(mesh: Mesh, params: ProblemParams, r: Reaction, pair: IntervalPair,
                     opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Biggest solution in the interval (mirrored monotone iteration from above).

    Realized exactly as the reflection of `minimal_solution`: v solves the
    reflected problem on (-upper, -lower) iff -v solves the original.
    """
    refl = r.reflected()
    mirrored = interval_pair(mesh, params, refl, -pair.upper, -pair.lower)
    rep = minimal_solution(mesh, params, refl, mirrored, opts)
    return make_report(Functional(mesh, params, r), -rep.u, rep.iterations,
                       lower=pair.lower, upper=pair.upper)


@dataclass(frozen=True)
class SolutionSet:
    """Distinct solutions found in an interval, with a completeness heuristic."""

    members: tuple
    complete_flag: bool


def _enum_starts(mesh: Mesh, pair: IntervalPair, count: int, rng, u1=None) -> list:
    lo, hi = pair.lower, pair.upper
    amp = max(float(np.max(np.abs(lo))), float(np.max(np.abs(hi))), 1.0)
    starts = [np.zeros(mesh.n)]
    if u1 is not None:
        top = amp / max(float(np.max(np.abs(u1))), 1e-30)
        for c in np.geomspace(0.05, 1.0, 4) * top:
            starts.append(c * u1)
            starts.append(-c * u1)
    n = mesh.n
    if 2**n <= 4 * count:
        for mask in range(2**n):
            bits = (mask >> np.arange(n)) & 1
            starts.append(np.where(bits.astype(bool), hi, lo))
    else:
        for _ in range(count // 2):
            bits = rng.integers(0, 2, size=n).astype(bool)
            starts.append(np.where(bits, hi, lo))
    while len(starts) < count:
        starts.append(lo + rng.random(n) * (hi - lo))
    return starts


def enumerate_solutions(mesh: Mesh, params: ProblemParams, r: Reaction,
                        pair: IntervalPair, starts: int = 64,
                        opts: SolverOptions = SolverOptions()) -> SolutionSet:
    """Brute-force multistart Newton enumeration of solutions in the interval.

    Restricted to n <= 8.  complete_flag is true when doubling the number of
    starts adds no member; it is a heuristic, not a proof.
    """
    if mesh.n > 8:
        raise ParameterError(f"enumeration oracle restricted to n <= 8, got n = {mesh.n}")
    func = Functional(mesh, params, r)
    try:
        u1 = principal_eigenpair(mesh, params, None, opts).u
    except ConvergenceError:
        u1 = None
    scale = 1.0 + max(float(np.max(np.abs(pair.lower))), float(np.max(np.abs(pair.upper))))
    ctol = 10.0 * ORDER_TOL * scale

    def run(start_list) -> list:
        found = []
        for s in start_list:
            try:
                rep = newton_solve(func, s, opts)
            except ConvergenceError:
                continue
            if float(np.min(rep.u - pair.lower)) < -ctol:
                continue
            if float(np.min(pair.upper - rep.u)) < -ctol:
                continue
            if all(is_distinct(rep.u, m.u) for m in found):
                found.append(make_report(func, rep.u, rep.iterations,
                                         lower=pair.lower, upper=pair.upper))
        found.sort(key=lambda m: (m.energy, tuple(m.u)))
        return found

    rng = np.random.default_rng(opts.seed)
    base = _enum_starts(mesh, pair, starts, rng, u1)
    first = run(base)
    extra = _enum_starts(mesh, pair, 2 * starts, np.random.default_rng(opts.seed + 1), u1)
    second = run(base + extra)
    new = any(all(is_distinct(m.u, f.u) for f in first) for m in second)
    return SolutionSet(members=tuple(second), complete_flag=not new)


def smallest_positive(mesh: Mesh, params: ProblemParams, r: Reaction,
                      opts: SolverOptions = SolverOptions(), eig1=None) -> SolveReport:
    """Smallest positive solution, with an interior-cone certificate.

    Pipeline: minimize the positively truncated functional to a negative
    energy state u_hat; find the largest eps with eps*u1 a verified
    subsolution below u_hat; then halve eps and take minimal solutions of
    (eps u1, u_hat) until they stabilize.
    """
    if eig1 is None:
        eig1 = principal_eigenpair(mesh, params, None, opts)
    u1 = eig1.u
    fplus = positive_truncation(r)
    pfunc = Functional(mesh, params, fplus)

    rng = np.random.default_rng(opts.seed)
    top = 1.0 / max(float(np.max(np.abs(u1))), 1e-30)
    start_list = [c * top * u1 for c in (0.25, 1.0, 4.0)]
    while len(start_list) < max(int(opts.multistart), 1):
        start_list.append(np.abs(rng.standard_normal(mesh.n)) * top)
    best = None
    for s in start_list:
        try:
            cand = minimize(pfunc, s, opts)
        except ConvergenceError:
            continue
        if best is None or cand.energy < best.energy:
            best = cand
    if best is None:
        raise ConvergenceError("all starts failed while minimizing the truncated functional")
    u_hat = best.u
    if best.energy >= 0.0:
        raise ParameterError(
            f"global truncated energy is nonnegative ({best.energy:.3e}); "
            "no nontrivial positive minimizer (origin slope likely <= lambda1)"
        )
    if float(np.min(u_hat)) <= 0.0:
        raise ConvergenceError("truncated-energy minimizer is not strictly positive")

    eps_cap = float(np.min(u_hat / u1))
    eps0 = None
    eps = eps_cap
    for _ in range(60):
        if check_subsolution(mesh, params, r, eps * u1, ORDER_TOL).ok:
            eps0 = eps
            break
        eps *= 0.5
    if eps0 is None:
        raise ParameterError(
            "no eps made eps*u1 a verified subsolution (origin slope likely <= lambda1)"
        )

    prev = None
    last = None
    for k in range(30):
        lo = (eps0 * 0.5**k) * u1
        pair = interval_pair(mesh, params, r, lo, u_hat)
        last = minimal_solution(mesh, params, r, pair, opts)
        if float(np.max(np.abs(last.u))) <= 1e-6:
            raise DegeneracyError("positive branch collapsed toward zero during the sweep",
                                  best=last)
        if prev is not None and float(np.max(np.abs(last.u - prev))) <= max(opts.tol, 1e-9):
            break
        prev = last.u
    else:
        raise ConvergenceError("minimal solutions did not stabilize along the eps sweep",
                               best=last)

    _, min_ratio = weighted_sup(mesh, last.u, params.s)
    if not min_ratio > 0.0:
        raise DegeneracyError(
            f"cone certificate failed: min u/d^s = {min_ratio:.3e} not positive", best=last
        )
    if last.classification != "positive":
        raise DegeneracyError(
            f"smallest-positive candidate classified as {last.classification}", best=last
        )
    return last


def biggest_negative(mesh: Mesh, params: ProblemParams, r: Reaction,
                     opts: SolverOptions = SolverOptions(), eig1=None) -> SolveReport:
    """Biggest negative solution, as the mirror of `smallest_positive`.

    Uses the odd reflection g(x, t) = -f(x, -t); the smallest positive
    solution v of the reflected problem gives u = -v here.
    """
    rep = smallest_positive(mesh, params, r.reflected(), opts, eig1)
    out = make_report(Functional(mesh, params, r), -rep.u, rep.iterations)
    _, min_ratio = weighted_sup(mesh, -out.u, params.s)
    if not min_ratio > 0.0:
        raise DegeneracyError(
            f"cone certificate failed for the negative branch: {min_ratio:.3e}", best=out
        )
    return out


def nodal_solution(mesh: Mesh, params: ProblemParams, r: Reaction, u_plus, u_minus,
                   opts: SolverOptions = SolverOptions(), lam2_path=None, eig1=None):
    """Sign-changing solution between the extremal constant-sign ones.

    Truncates the reaction to [u_minus, u_plus], verifies both endpoints as
    local minimizers of the truncated functional, and runs a mountain-pass
    search between them (with seeded retries).  Returns (SolveReport, diag)
    where diag holds the pass level, endpoint levels, and the max of the
    truncated energy along a scaled second-eigenvalue path (expected < 0).
    """
    up = check_grid(mesh, u_plus)
    um = check_grid(mesh, u_minus)
    if classify_sign(up) != "positive" or classify_sign(um) != "negative":
        raise ParameterError("nodal search needs a positive upper and negative lower state")
    if np.any(um > up):
        raise ParameterError("nodal search needs u_minus <= u_plus node-wise")

    trunc = interval_truncation(r, um, up)
    tfunc = Functional(mesh, params, trunc)
    rng = np.random.default_rng(opts.seed + 77)
    for name, endpoint in (("u_plus", up), ("u_minus", um)):
        res = float(np.max(np.abs(tfunc.residual(endpoint))))
        if res > max(100.0 * opts.tol, 1e-8):
            raise ParameterError(f"{name} is not critical for the truncated functional "
                                 f"(residual {res:.3e})")
        scale = float(endpoint @ (tfunc.hessian(endpoint) @ endpoint)) + 1.0
        for _ in range(10):
            d = rng.standard_normal(mesh.n)
            d /= float(np.max(np.abs(d)))
            quad = float(d @ (tfunc.hessian(endpoint) @ d))
            if quad < -1e-8 * abs(scale):
                raise InternalCheckError(
                    f"{name} fails the local-minimizer test: direction with "
                    f"curvature {quad:.3e}"
                )

    report = None
    last_exc = None
    for attempt in range(max(int(opts.retries), 1)):
        o2 = opts.with_(seed=opts.seed + 1000 * attempt,
                        mp_noise=opts.mp_noise * (1.0 + attempt))
        try:
            rep, _path = mountain_pass(tfunc, up, um, o2)
        except (DegeneratePathError, ConvergenceError) as exc:
            last_exc = exc
            continue
        if not is_distinct(rep.u, np.zeros(mesh.n)):
            last_exc = DegeneratePathError("pass state collapsed to zero", best=rep)
            continue
        if rep.classification != "nodal":
            last_exc = DegeneratePathError(
                f"pass state is {rep.classification}, not nodal", best=rep)
            continue
        pair = IntervalPair(lower=um.copy(), upper=up.copy())
        _assert_contained(rep.u, pair, 10.0 * ORDER_TOL * (1.0 + float(np.max(np.abs(up)))),
                          "nodal_solution")
        report = rep
        break
    if report is None:
        raise NotFoundError(
            f"no sign-changing mountain-pass solution after {opts.retries} retries "
            f"(last failure: {last_exc})"
        )

    if lam2_path is None:
        _, lam2_path = second_eigenvalue_minimax(mesh, params, opts, u1=None if eig1 is None
                                                 else eig1.u)
    scan_eps, scan_max = None, None
    eps = 1.0
    for _ in range(40):
        vals = [tfunc.value(eps * s) for s in lam2_path.states]
        if max(vals) < 0.0:
            scan_eps, scan_max = eps, float(max(vals))
            break
        eps *= 0.5
    diag = {
        "mp_level": report.energy,
        "endpoint_levels": (tfunc.value(up), tfunc.value(um)),
        "path_scan_eps": scan_eps,
        "path_scan_max": scan_max,
    }
    final = make_report(Functional(mesh, params, r), report.u, report.iterations,
                        lower=um, upper=up)
    return final, diag
