"""Config loading, experiment drivers, output emission, verification, CLI."""

import json

import numpy as np
import pytest

from fplap import cli
from fplap.errors import ParameterError
from fplap.pipeline import (_profile_csv, config_to_ini, emit_outputs,
                            load_config, run_eig, run_extremal, run_nodal,
                            run_oracle, verify_run)

BASE_INI = """
[problem]
p = 2.0
s = 0.4
n = 12
c0 = 20.0
q = 4.0

[reaction]
mu = 1.5
mu_relative_to = lambda1

[solver]
seed = 42

[outputs]
plot_files = false
"""


def with_overrides(**kw):
    cfg = load_config(BASE_INI)
    for key, val in kw.items():
        setattr(cfg, key, val)
    return cfg


def small_problem(n, c0=40.0):
    cfg = load_config(BASE_INI)
    prob = cfg.problem
    cfg.problem = type(prob)(p=prob.p, s=prob.s, a=prob.a, b=prob.b, n=n, c0=c0,
                             q=prob.q)
    return cfg


def test_config_defaults_and_roundtrip():
    cfg = load_config(BASE_INI)
    assert cfg.problem.n == 12
    assert cfg.tol == 1e-10          # untouched default
    assert cfg.reaction_q == 4.0     # inherits problem q
    assert cfg.plot_files is False
    again = load_config(config_to_ini(cfg))
    assert again.echo() == cfg.echo()


def test_config_rejects_unknown_names():
    with pytest.raises(ParameterError, match="unknown"):
        load_config("[problem]\nzz = 1\n")
    with pytest.raises(ParameterError, match="unknown"):
        load_config("[misc]\na = 1\n")


def test_config_rejects_bad_values():
    with pytest.raises(ParameterError, match="int"):
        load_config("[problem]\nn = twelve\n")
    with pytest.raises(ParameterError):
        load_config("[reaction]\nmu_relative_to = lambda9\n")


def test_config_invalid_problem_fails_before_compute():
    with pytest.raises(ParameterError, match="s"):
        load_config("[problem]\ns = 1.2\n")


def test_run_eig_report_and_determinism():
    cfg = with_overrides()
    first = run_eig(cfg)
    assert first.status == "ok"
    assert first.lambda1 > 0.0
    assert first.lambda2_estimate > first.lambda1
    assert "u1" in first.profiles
    assert first.profiles["u1"]["cone_min_ratio"] > 0.0
    assert first.backend in ("cython", "python")
    second = run_eig(load_config(BASE_INI))
    a, b = first.to_dict(), second.to_dict()
    a.pop("timings"), b.pop("timings")
    assert a == b
    np.testing.assert_array_equal(first.profile_values["u1"],
                                  second.profile_values["u1"])


def test_run_extremal_small_mesh():
    report = run_extremal(with_overrides())
    assert report.status == "ok", report.error
    assert report.resolved_mu == pytest.approx(1.5 * report.lambda1, rel=1e-12)
    up = report.profile_values["u_plus"]
    um = report.profile_values["u_minus"]
    assert np.min(up) > 0.0
    np.testing.assert_allclose(um, -up, rtol=0, atol=1e-8)
    assert report.profiles["u_plus"]["cone_min_ratio"] > 0.0
    assert report.profiles["u_plus"]["residual_inf"] <= 1e-9
    assert report.timings  # each stage recorded


def test_run_nodal_warns_inside_spectral_gap():
    # mu strictly between the first two eigenvalues: the sign-changing
    # search is expected to come home empty, but the run must not crash
    cfg = with_overrides(mu=1.1)
    report = run_nodal(cfg)
    assert any("second eigenvalue" in w for w in report.warnings)
    assert report.status in ("ok", "error")
    if report.status == "error":
        assert report.error["type"] in ("NotFoundError", "DegeneratePathError")
        assert "u_plus" in report.profiles  # partial results survive


def test_run_nodal_complete():
    cfg = small_problem(12, c0=30.0)
    cfg.mu_relative_to = "lambda2"
    cfg.mu = 1.2
    report = run_nodal(cfg)
    assert report.status == "ok", report.error
    tilde = report.profile_values["u_nodal"]
    up = report.profile_values["u_plus"]
    um = report.profile_values["u_minus"]
    assert np.all(tilde <= up + 1e-8) and np.all(tilde >= um - 1e-8)
    assert report.profiles["u_nodal"]["classification"] == "nodal"
    diag = report.diagnostics["nodal"]
    assert diag["mp_level"] >= max(diag["endpoint_levels"]) - 1e-12
    assert diag["path_scan_max"] < 0.0


def test_run_oracle_small_mesh():
    cfg = small_problem(6)
    report = run_oracle(cfg)
    assert report.status == "ok", report.error
    assert report.oracle["complete_flag"]
    assert report.oracle["count"] >= 3
    kinds = {m["classification"] for m in report.oracle["members"]}
    assert {"zero", "positive", "negative"} <= kinds


def test_run_oracle_rejects_large_mesh():
    report = run_oracle(small_problem(16))
    assert report.status == "error"
    assert report.error["type"] == "ParameterError"


def test_emit_verify_and_determinism(tmp_path):
    cfg = small_problem(8)
    report = run_eig(cfg)
    first = emit_outputs(report, out_dir=tmp_path / "a")
    assert (first / "report.json").exists()
    assert (first / "u1.csv").exists()
    check = verify_run(first)
    assert check.ok, check.mismatches
    assert check.checks
    # same config, fresh run: identical bytes in every profile
    second = emit_outputs(run_eig(small_problem(8)), out_dir=tmp_path / "b")
    assert (first / "u1.csv").read_bytes() == (second / "u1.csv").read_bytes()
    ra = json.loads((first / "report.json").read_text())
    rb = json.loads((second / "report.json").read_text())
    ra.pop("timings"), rb.pop("timings")
    assert ra == rb
    # overwrite of an existing run directory is allowed
    emit_outputs(report, out_dir=tmp_path / "a")


def test_emit_plot_files(tmp_path):
    cfg = small_problem(8)
    cfg.plot_files = True
    target = emit_outputs(run_eig(cfg), out_dir=tmp_path)
    dat = (target / "u1.dat").read_text().strip().split("\n")
    assert len(dat) == 8
    assert len(dat[0].split()) == 2


def test_emit_refuses_foreign_directory(tmp_path):
    cfg = small_problem(8)
    report = run_eig(cfg)
    target = tmp_path / report.run_id()
    target.mkdir()
    (target / "keepsake.txt").write_text("not a run\n")
    with pytest.raises(ParameterError, match="refusing"):
        emit_outputs(report, out_dir=tmp_path)
    assert (target / "keepsake.txt").exists()


def test_verify_detects_tampering(tmp_path):
    target = emit_outputs(run_eig(small_problem(8)), out_dir=tmp_path)
    csv_path = target / "u1.csv"
    lines = csv_path.read_text().splitlines()
    cells = lines[3].split(",")
    cells[1] = repr(float(cells[1]) * 1.001)
    lines[3] = ",".join(cells)
    csv_path.write_text("\n".join(lines) + "\n")
    check = verify_run(target)
    assert not check.ok
    assert any("u1" in m for m in check.mismatches)


def test_verify_requires_report(tmp_path):
    with pytest.raises(ParameterError, match="report.json"):
        verify_run(tmp_path)


def test_profile_csv_shape():
    nodes = np.array([-0.5, 0.0, 0.5])
    dist = np.array([0.5, 1.0, 0.5])
    text = _profile_csv(nodes, dist, 0.4, np.array([1.0, 2.0, 1.0]))
    lines = text.strip().split("\n")
    assert lines[0] == "x,value,dist_s_ratio"
    assert len(lines) == 4
    empty = _profile_csv(nodes[:0], dist[:0], 0.4, np.array([]))
    assert empty == "x,value,dist_s_ratio\n"


def test_cli_eig_and_verify(tmp_path):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(BASE_INI)
    out = tmp_path / "runs"
    code = cli.main(["eig", str(cfg_path), "--n", "8", "--out", str(out), "--quiet"])
    assert code == 0
    run_dir = out / "eig-n8-seed42"
    assert (run_dir / "report.json").exists()
    assert cli.main(["verify", str(run_dir), "--quiet"]) == 0
    # tamper, then verify again
    csv_path = run_dir / "u1.csv"
    lines = csv_path.read_text().splitlines()
    cells = lines[1].split(",")
    cells[1] = "0.123"
    lines[1] = ",".join(cells)
    csv_path.write_text("\n".join(lines) + "\n")
    assert cli.main(["verify", str(run_dir), "--quiet"]) == 2


def test_cli_rejects_bad_config(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\ns = 1.2\n")
    assert cli.main(["eig", str(bad), "--quiet"]) == 2
    missing = tmp_path / "missing"
    assert cli.main(["verify", str(missing), "--quiet"]) == 2


def test_cli_seed_override_changes_run_id(tmp_path):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(BASE_INI)
    out = tmp_path / "runs"
    code = cli.main(["eig", str(cfg_path), "--n", "8", "--seed", "7",
                     "--out", str(out), "--quiet"])
    assert code == 0
    assert (out / "eig-n8-seed7" / "report.json").exists()


def test_cli_module_entry(tmp_path):
    import subprocess
    import sys

    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(BASE_INI)
    proc = subprocess.run(
        [sys.executable, "-m", "fplap.cli", "eig", str(cfg_path), "--n", "8",
         "--out", str(tmp_path / "runs"), "--quiet"],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
