"""Shipped acceptance gate: nine criteria, one test (and one PASS line) each.

Tolerances and sizes here are contractual; loosen nothing.  Every oracle is
independent of the package's own assembly (hand-coded loops, dense
eigensolves, brute-force enumeration).
"""

import numpy as np
import pytest

from conftest import (dense_p2_matrix, make_params, model_for, oracle_tails,
                      supersolution_source)
from fplap.lattice import (biggest_negative, check_supersolution,
                           enumerate_solutions, interval_pair, interval_solve,
                           maximal_solution, meet, minimal_solution,
                           smallest_positive)
from fplap.mesh import build_mesh, weighted_sup
from fplap.operator import apply, energy
from fplap.pipeline import emit_outputs, load_config, run_extremal, run_nodal, run_oracle
from fplap.spectral import principal_eigenpair, weight_compare
from fplap.variational import SolverOptions, is_distinct, solve_rhs


def test_criterion_1_indicator_exactness():
    worst = 0.0
    for p, s in [(2.0, 0.25), (2.0, 0.4), (3.0, 0.2), (2.5, 0.3)]:
        for n in (8, 64):
            params = make_params(p=p, s=s, n=n, q=3.5, c0=2.0)
            mesh = build_mesh(params)
            got = apply(mesh, params, np.ones(n))
            want = oracle_tails(params.a, params.b, n, p, s)
            rel = float(np.max(np.abs(got - want) / np.abs(want)))
            worst = max(worst, rel)
            assert rel <= 1e-12, f"(p,s,n)=({p},{s},{n}): rel error {rel:.3e}"
    print(f"PASS criterion 1: apply(1) = tails, worst rel error {worst:.3e}")


def test_criterion_2_operator_laws():
    params = make_params(p=2.5, s=0.3, n=8)
    mesh = build_mesh(params)
    rng = np.random.default_rng(0)
    worst_gap = np.inf
    for _ in range(1000):
        u = rng.standard_normal(8)
        v = rng.standard_normal(8)
        gap = float((apply(mesh, params, u) - apply(mesh, params, v)) @ (u - v))
        worst_gap = min(worst_gap, gap)
        assert gap >= -1e-12

    u = rng.standard_normal(8)
    au = apply(mesh, params, u)
    scale = float(np.max(np.abs(au)))
    for c in (0.5, 3.0):
        diff = apply(mesh, params, c * u) - c ** (params.p - 1.0) * au
        assert np.max(np.abs(diff)) <= 1e-12 * max(1.0, c ** (params.p - 1.0) * scale)
    odd = apply(mesh, params, -u) + au
    assert np.max(np.abs(odd)) <= 1e-12 * max(1.0, scale)

    params5 = make_params(p=2.5, s=0.3, n=5)
    mesh5 = build_mesh(params5)
    u5 = rng.standard_normal(5)
    grad = mesh5.h * apply(mesh5, params5, u5)
    eps = 1e-6
    worst_fd = 0.0
    for i in range(5):
        e = np.zeros(5)
        e[i] = eps
        fd = (energy(mesh5, params5, u5 + e) - energy(mesh5, params5, u5 - e)) / (2 * eps)
        rel = abs(fd - grad[i]) / abs(grad[i])
        worst_fd = max(worst_fd, rel)
        assert rel <= 1e-5
    print(f"PASS criterion 2: worst monotonicity gap {worst_gap:.3e}, "
          f"worst FD rel error {worst_fd:.3e}")


def test_criterion_3_spectral_cross_validation():
    params = make_params(p=2.0, s=0.4, n=32)
    mesh = build_mesh(params)
    opts = SolverOptions()
    lams = np.linalg.eigvalsh(dense_p2_matrix(params.a, params.b, params.n, params.s))
    eig = principal_eigenpair(mesh, params, None, opts)
    rel1 = abs(eig.lam - lams[0]) / lams[0]
    assert rel1 <= 1e-8
    from fplap.spectral import second_eigenvalue_minimax

    est2, _ = second_eigenvalue_minimax(mesh, params, opts, u1=eig.u)
    rel2 = abs(est2 - lams[1]) / lams[1]
    assert rel2 <= 0.05
    assert np.min(eig.u) > 0.0
    _, min_ratio = weighted_sup(mesh, eig.u, params.s)
    assert min_ratio > 0.0
    rng = np.random.default_rng(3)
    gaps = []
    for _ in range(5):
        tilde = np.ones(mesh.n) * rng.uniform(0.2, 0.95, mesh.n)
        report = weight_compare(mesh, params, np.ones(mesh.n), tilde, opts)
        gaps.append(report.gap)
        assert report.gap > 0.0
    print(f"PASS criterion 3: lam1 rel {rel1:.3e}, lam2 rel {rel2:.3e}, "
          f"min weight gap {min(gaps):.3e}")


def test_criterion_4_lattice_closure(mesh16, params16, eig16, opts):
    mu = 1.5 * eig16.lam
    r = model_for(params16, mu=mu)
    base = supersolution_source(params16, mu)
    rng = np.random.default_rng(4)
    worst = np.inf
    for _ in range(100):
        w1 = solve_rhs(mesh16, params16, base + 3.0 * rng.random(mesh16.n)).u
        w2 = solve_rhs(mesh16, params16, base + 3.0 * rng.random(mesh16.n)).u
        assert check_supersolution(mesh16, params16, r, w1, tol=10 * opts.tol).ok
        assert check_supersolution(mesh16, params16, r, w2, tol=10 * opts.tol).ok
        got = check_supersolution(mesh16, params16, r, meet(w1, w2), tol=10 * opts.tol)
        worst = min(worst, got.margin)
        assert got.ok, f"meet failed: margin {got.margin:.3e}"
    print(f"PASS criterion 4: 100/100 meets pass at 10x tol, worst margin {worst:.3e}")


def test_criterion_5_interval_containment(mesh16, params16, eig16, opts):
    mu = 1.5 * eig16.lam
    r = model_for(params16, mu=mu)
    base = supersolution_source(params16, mu)
    rng = np.random.default_rng(5)
    worst_res = 0.0
    for _ in range(100):
        upper = solve_rhs(mesh16, params16, base + 3.0 * rng.random(mesh16.n)).u
        lower = -solve_rhs(mesh16, params16, base + 3.0 * rng.random(mesh16.n)).u
        pair = interval_pair(mesh16, params16, r, lower, upper, tol=1e-8)
        report = interval_solve(mesh16, params16, r, pair, opts)
        assert report.ordering == (True, True)
        worst_res = max(worst_res, report.residual_inf)
        assert report.residual_inf <= 1e-8
    print(f"PASS criterion 5: 100/100 interval solves contained, "
          f"worst untruncated residual {worst_res:.3e}")


def test_criterion_6_extremality_vs_oracle():
    params = make_params(p=2.0, s=0.4, n=6, c0=40.0, q=4.0)
    mesh = build_mesh(params)
    opts = SolverOptions()
    eig = principal_eigenpair(mesh, params, None, opts)
    mu = 1.5 * eig.lam
    r = model_for(params, mu=mu)
    big = np.full(mesh.n, supersolution_source(params, mu))
    pair = interval_pair(mesh, params, r, -big, big)
    lo = minimal_solution(mesh, params, r, pair, opts)
    hi = maximal_solution(mesh, params, r, pair, opts)
    found = enumerate_solutions(mesh, params, r, pair, starts=64, opts=opts)
    assert found.complete_flag
    stack = np.array([m.u for m in found.members])
    err_lo = float(np.max(np.abs(lo.u - stack.min(axis=0))))
    err_hi = float(np.max(np.abs(hi.u - stack.max(axis=0))))
    assert err_lo <= 1e-6 and err_hi <= 1e-6
    print(f"PASS criterion 6: minimal/maximal vs {len(found.members)}-member oracle, "
          f"errors {err_lo:.3e} / {err_hi:.3e}")


ORACLE_INI = """
[problem]
p = 2.0
s = 0.4
n = 6
c0 = 40.0
q = 4.0

[reaction]
mu = 1.5
mu_relative_to = lambda1

[solver]
seed = 42
oracle_starts = 64
"""


def test_criterion_7_extremal_pipeline():
    cfg = load_config(ORACLE_INI)
    report = run_extremal(cfg)
    assert report.status == "ok", report.error
    up = report.profile_values["u_plus"]
    um = report.profile_values["u_minus"]
    assert report.profiles["u_plus"]["classification"] == "positive"
    assert report.profiles["u_plus"]["cone_min_ratio"] > 0.0
    mirror = float(np.max(np.abs(um + up)))
    assert mirror <= 1e-8
    oracle = run_oracle(load_config(ORACLE_INI))
    assert oracle.status == "ok", oracle.error
    positives = [name for name, meta in oracle.profiles.items()
                 if name.startswith("member_") and meta["classification"] == "positive"]
    assert positives
    for name in positives:
        v = oracle.profile_values[name]
        assert np.all(up <= v + 1e-6), "oracle found a positive solution below u_plus"
    print(f"PASS criterion 7: u_plus positive with cone certificate, mirror gap "
          f"{mirror:.3e}, minimal among {len(positives)} positive oracle member(s)")


NODAL_INI = """
[problem]
p = 2.0
s = 0.4
n = 16
c0 = 24.0
q = 4.0

[reaction]
mu = 1.2
mu_relative_to = lambda2

[solver]
seed = 42
"""


def test_criterion_8_nodal_pipeline():
    report = run_nodal(load_config(NODAL_INI))
    assert report.status == "ok", report.error
    assert report.resolved_mu == pytest.approx(1.2 * report.lambda2_estimate, rel=1e-12)
    tilde = report.profile_values["u_nodal"]
    up = report.profile_values["u_plus"]
    um = report.profile_values["u_minus"]
    assert report.profiles["u_nodal"]["classification"] == "nodal"
    assert np.all(tilde >= um - 1e-8) and np.all(tilde <= up + 1e-8)
    assert report.profiles["u_nodal"]["residual_inf"] <= 1e-8
    n = tilde.shape[0]
    assert is_distinct(tilde, np.zeros(n))
    assert is_distinct(tilde, up) and is_distinct(tilde, um)
    diag = report.diagnostics["nodal"]
    assert diag["mp_level"] >= max(diag["endpoint_levels"]) - 1e-12
    assert diag["path_scan_max"] < 0.0
    print(f"PASS criterion 8: nodal solution, level {diag['mp_level']:.6g} >= "
          f"endpoints, path scan max {diag['path_scan_max']:.3e} < 0")


def test_criterion_9_reproducibility(tmp_path):
    cfg_a = load_config(ORACLE_INI)
    cfg_b = load_config(ORACLE_INI)
    dir_a = emit_outputs(run_extremal(cfg_a), out_dir=tmp_path / "a")
    dir_b = emit_outputs(run_extremal(cfg_b), out_dir=tmp_path / "b")
    names = sorted(p.name for p in dir_a.glob("*.csv"))
    assert names == sorted(p.name for p in dir_b.glob("*.csv"))
    assert names  # at least one profile
    for name in names:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name
    print(f"PASS criterion 9: {len(names)} CSV profiles byte-identical across reruns")
