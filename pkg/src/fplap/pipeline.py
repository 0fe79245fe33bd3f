"""Config-driven experiment pipelines with reproducible, self-verifying outputs.

Configs are flat INI files with fixed sections (problem, reaction, solver,
outputs); unknown sections or keys are errors.  Runs write, atomically via a
staging directory: report.json, one CSV per solution profile with header
``x,value,dist_s_ratio`` at 17 significant digits, and optional two-column
plot files.  `verify_run` recomputes every stored residual/energy claim
from the profiles on disk.
"""

from __future__ import annotations

import configparser
import io
import json
import os
import shutil
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import fplap
from fplap import lattice, operator, spectral
from fplap.errors import (ConvergenceError, FplapError, NotFoundError, ParameterError)
from fplap.mesh import ProblemParams, build_mesh, weighted_sup
from fplap.reaction import ModelReaction, growth_check, origin_slope
from fplap.variational import Functional, SolverOptions

_SCHEMA = {
    "problem": {"p": float, "s": float, "a": float, "b": float, "n": int,
                "c0": float, "q": float},
    "reaction": {"family": str, "mu": float, "mu_relative_to": str, "kappa": float,
                 "q": float},
    "solver": {"seed": int, "tol": float, "max_iter": int, "path_states": int,
               "multistart": int, "retries": int, "oracle_starts": int},
    "outputs": {"dir": str, "plot_files": bool},
}

_DEFAULTS = {
    "problem": {"p": 2.0, "s": 0.4, "a": -1.0, "b": 1.0, "n": 64, "c0": 2.5, "q": 4.0},
    "reaction": {"family": "model", "mu": 1.5, "mu_relative_to": "lambda1",
                 "kappa": 1.0, "q": None},
    "solver": {"seed": 42, "tol": 1e-10, "max_iter": 5000, "path_states": 17,
               "multistart": 8, "retries": 5, "oracle_starts": 64},
    "outputs": {"dir": "runs", "plot_files": True},
}

_REACTION_FAMILIES = ("model",)
_MU_MODES = ("none", "lambda1", "lambda2")


@dataclass
class ExperimentConfig:
    """Validated experiment description (see `load_config`)."""

    problem: ProblemParams
    reaction_family: str
    mu: float
    mu_relative_to: str
    kappa: float
    reaction_q: float
    seed: int
    tol: float
    max_iter: int
    path_states: int
    multistart: int
    retries: int
    oracle_starts: int
    out_dir: str
    plot_files: bool

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.tol, max_iter=self.max_iter, seed=self.seed,
                             path_states=self.path_states, multistart=self.multistart,
                             retries=self.retries)

    def echo(self) -> dict:
        """Every field with its final value, grouped like the file format."""
        return {
            "problem": {"p": self.problem.p, "s": self.problem.s, "a": self.problem.a,
                        "b": self.problem.b, "n": self.problem.n, "c0": self.problem.c0,
                        "q": self.problem.q},
            "reaction": {"family": self.reaction_family, "mu": self.mu,
                         "mu_relative_to": self.mu_relative_to, "kappa": self.kappa,
                         "q": self.reaction_q},
            "solver": {"seed": self.seed, "tol": self.tol, "max_iter": self.max_iter,
                       "path_states": self.path_states, "multistart": self.multistart,
                       "retries": self.retries, "oracle_starts": self.oracle_starts},
            "outputs": {"dir": self.out_dir, "plot_files": self.plot_files},
        }


def _parse_value(section, key, raw, kind):
    try:
        if kind is bool:
            lowered = str(raw).strip().lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except (TypeError, ValueError):
        raise ParameterError(
            f"config [{section}] {key} = {raw!r} is not a valid {kind.__name__}"
        ) from None


def load_config(source) -> ExperimentConfig:
    """Load and validate a config from a path or an INI string.

    Unknown sections/keys are errors; missing keys take recorded defaults;
    ranges are rejected here, before any computation.
    """
    parser = configparser.ConfigParser(interpolation=None)
    text = source if "\n" in str(source) or "=" in str(source) else None
    try:
        if text is not None:
            parser.read_string(str(source))
        else:
            path = Path(source)
            if not path.exists():
                raise ParameterError(f"config file not found: {path}")
            parser.read_string(path.read_text())
    except configparser.Error as exc:
        raise ParameterError(f"config is not valid INI: {exc}") from None

    values = {sec: dict(defs) for sec, defs in _DEFAULTS.items()}
    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise ParameterError(f"unknown config section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in _SCHEMA[sec]:
                raise ParameterError(f"unknown config key [{sec}] {key}")
            values[sec][key] = _parse_value(sec, key, raw, _SCHEMA[sec][key])

    prob = values["problem"]
    params = ProblemParams(p=prob["p"], s=prob["s"], a=prob["a"], b=prob["b"],
                           n=prob["n"], c0=prob["c0"], q=prob["q"])
    reac = values["reaction"]
    if reac["family"] not in _REACTION_FAMILIES:
        raise ParameterError(f"unknown reaction family {reac['family']!r}; "
                             f"known: {', '.join(_REACTION_FAMILIES)}")
    if reac["mu_relative_to"] not in _MU_MODES:
        raise ParameterError(f"mu_relative_to must be one of {', '.join(_MU_MODES)}, "
                             f"got {reac['mu_relative_to']!r}")
    rq = reac["q"] if reac["q"] is not None else params.q
    solver = values["solver"]
    outputs = values["outputs"]
    return ExperimentConfig(
        problem=params, reaction_family=reac["family"], mu=reac["mu"],
        mu_relative_to=reac["mu_relative_to"], kappa=reac["kappa"], reaction_q=rq,
        seed=solver["seed"], tol=solver["tol"], max_iter=solver["max_iter"],
        path_states=solver["path_states"], multistart=solver["multistart"],
        retries=solver["retries"], oracle_starts=solver["oracle_starts"],
        out_dir=outputs["dir"], plot_files=outputs["plot_files"],
    )


def config_to_ini(cfg: ExperimentConfig) -> str:
    """Serialize back to INI (lossless round trip through `load_config`)."""
    parser = configparser.ConfigParser(interpolation=None)
    for sec, kv in cfg.echo().items():
        parser[sec] = {k: repr(v) if isinstance(v, float) else str(v)
                       for k, v in kv.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


@dataclass
class RunReport:
    """Everything a run claims, in JSON-serializable form plus raw profiles."""

    kind: str
    config: dict
    status: str = "ok"
    error: Optional[dict] = None
    resolved_mu: Optional[float] = None
    lambda1: Optional[float] = None
    lambda1_residual: Optional[float] = None
    lambda2_estimate: Optional[float] = None
    profiles: dict = field(default_factory=dict)  # name -> metadata dict
    profile_values: dict = field(default_factory=dict)  # name -> ndarray
    oracle: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    version: str = fplap.__version__
    backend: str = ""
    exception: Optional[BaseException] = None  # not serialized

    def run_id(self) -> str:
        n = self.config["problem"]["n"]
        seed = self.config["solver"]["seed"]
        return f"{self.kind}-n{n}-seed{seed}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "error": self.error,
            "config": self.config,
            "resolved_mu": self.resolved_mu,
            "lambda1": self.lambda1,
            "lambda1_residual": self.lambda1_residual,
            "lambda2_estimate": self.lambda2_estimate,
            "profiles": self.profiles,
            "oracle": self.oracle,
            "diagnostics": self.diagnostics,
            "warnings": self.warnings,
            "version": self.version,
            "backend": self.backend,
            "timings": self.timings,
        }


def _resolve_reaction(cfg: ExperimentConfig, lambda1, lambda2):
    """Concrete reaction with mu resolved against computed eigenvalues."""
    if cfg.mu_relative_to == "lambda1":
        mu = cfg.mu * lambda1
    elif cfg.mu_relative_to == "lambda2":
        if lambda2 is None:
            raise ParameterError("mu_relative_to = lambda2 requires the nodal pipeline")
        mu = cfg.mu * lambda2
    else:
        mu = cfg.mu
    return ModelReaction(p=cfg.problem.p, q=cfg.reaction_q, mu=mu, kappa=cfg.kappa), mu


def _profile_entry(cfg, mesh, report, name):
    norm, min_ratio = weighted_sup(mesh, report.u, cfg.problem.s)
    return {
        "csv": f"{name}.csv",
        "residual_inf": report.residual_inf,
        "energy": report.energy,
        "classification": report.classification,
        "iterations": report.iterations,
        "sup_norm": float(np.max(np.abs(report.u))),
        "weighted_sup_norm": norm,
        "cone_min_ratio": min_ratio,
        "ordering": list(report.ordering) if report.ordering is not None else None,
    }


class _Stages:
    """Timing + warning capture around pipeline stages."""

    def __init__(self, report: RunReport, progress=None):
        self.report = report
        self.progress = progress

    def run(self, name, fn):
        if self.progress:
            self.progress(f"[{self.report.run_id()}] {name}")
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always")
            try:
                return fn()
            finally:
                self.report.timings[name] = time.perf_counter() - t0
                for w in wlist:
                    self.report.warnings.append(f"{name}: {w.message}")


def _eig_profile(cfg, mesh, eig1, report):
    report.lambda1 = eig1.lam
    report.lambda1_residual = eig1.residual
    norm, min_ratio = weighted_sup(mesh, eig1.u, cfg.problem.s)
    report.profiles["u1"] = {
        "csv": "u1.csv",
        "residual_inf": eig1.residual,
        "energy": None,
        "classification": "positive",
        "iterations": eig1.iterations,
        "sup_norm": float(np.max(np.abs(eig1.u))),
        "weighted_sup_norm": norm,
        "cone_min_ratio": min_ratio,
        "ordering": None,
        "normalization": eig1.normalization,
        "lam": eig1.lam,
    }
    report.profile_values["u1"] = np.asarray(eig1.u)


def _common_head(cfg: ExperimentConfig, report: RunReport, stages: _Stages,
                 need_lambda2: bool):
    """Mesh, principal pair, optional lambda2, resolved reaction + checks."""
    mesh = stages.run("mesh", lambda: build_mesh(cfg.problem))
    opts = cfg.solver_options()
    eig1 = stages.run("eigen_principal",
                      lambda: spectral.principal_eigenpair(mesh, cfg.problem, None, opts))
    _eig_profile(cfg, mesh, eig1, report)
    lam2 = path2 = None
    if need_lambda2 or cfg.mu_relative_to == "lambda2":
        lam2, path2 = stages.run(
            "eigen_second",
            lambda: spectral.second_eigenvalue_minimax(mesh, cfg.problem, opts, u1=eig1.u))
        report.lambda2_estimate = lam2

    def resolve():
        r, mu = _resolve_reaction(cfg, eig1.lam, lam2)
        growth = growth_check(r, cfg.problem)
        if not growth.passed:
            raise ParameterError(
                f"reaction violates the declared growth budget: ratio "
                f"{growth.max_ratio:.3g} at (x, t) = ({growth.worst_x:.3g}, "
                f"{growth.worst_t:.3g})"
            )
        lo_slope, _ = origin_slope(r, mesh.nodes, cfg.problem.p)
        if lo_slope <= eig1.lam:
            warnings.warn(f"sampled origin slope {lo_slope:.6g} does not exceed "
                          f"lambda1 = {eig1.lam:.6g}; positive branch may not exist")
        if lam2 is not None and mu <= lam2:
            warnings.warn(f"mu = {mu:.6g} does not exceed the second eigenvalue "
                          f"estimate {lam2:.6g}; nodal search may fail")
        return r, mu

    r, mu = stages.run("reaction", resolve)
    report.resolved_mu = mu
    return mesh, opts, eig1, lam2, path2, r


def _extremal_stages(cfg, report, stages, mesh, opts, eig1, r):
    u_plus = stages.run(
        "smallest_positive",
        lambda: lattice.smallest_positive(mesh, cfg.problem, r, opts, eig1=eig1))
    report.profiles["u_plus"] = _profile_entry(cfg, mesh, u_plus, "u_plus")
    report.profile_values["u_plus"] = u_plus.u
    u_minus = stages.run(
        "biggest_negative",
        lambda: lattice.biggest_negative(mesh, cfg.problem, r, opts, eig1=eig1))
    report.profiles["u_minus"] = _profile_entry(cfg, mesh, u_minus, "u_minus")
    report.profile_values["u_minus"] = u_minus.u
    return u_plus, u_minus


def run_extremal(cfg: ExperimentConfig, progress=None) -> RunReport:
    """Smallest positive and biggest negative solutions with cone certificates."""
    report = RunReport(kind="extremal", config=cfg.echo(),
                       backend=fplap.kernels.backend())
    stages = _Stages(report, progress)
    try:
        mesh, opts, eig1, _lam2, _path2, r = _common_head(cfg, report, stages, False)
        _extremal_stages(cfg, report, stages, mesh, opts, eig1, r)
    except FplapError as exc:
        _record_error(report, exc)
    return report


def run_nodal(cfg: ExperimentConfig, progress=None) -> RunReport:
    """Extremal pair plus a sign-changing solution between them."""
    report = RunReport(kind="nodal", config=cfg.echo(), backend=fplap.kernels.backend())
    stages = _Stages(report, progress)
    try:
        mesh, opts, eig1, lam2, path2, r = _common_head(cfg, report, stages, True)
        u_plus, u_minus = _extremal_stages(cfg, report, stages, mesh, opts, eig1, r)
        nodal, diag = stages.run(
            "nodal",
            lambda: lattice.nodal_solution(mesh, cfg.problem, r, u_plus.u, u_minus.u,
                                           opts, lam2_path=path2, eig1=eig1))
        report.profiles["u_nodal"] = _profile_entry(cfg, mesh, nodal, "u_nodal")
        report.profile_values["u_nodal"] = nodal.u
        report.diagnostics["nodal"] = diag
    except FplapError as exc:
        _record_error(report, exc)
    return report


def run_eig(cfg: ExperimentConfig, progress=None) -> RunReport:
    """Principal pair and second-eigenvalue estimate only."""
    report = RunReport(kind="eig", config=cfg.echo(), backend=fplap.kernels.backend())
    stages = _Stages(report, progress)
    try:
        mesh = stages.run("mesh", lambda: build_mesh(cfg.problem))
        opts = cfg.solver_options()
        eig1 = stages.run(
            "eigen_principal",
            lambda: spectral.principal_eigenpair(mesh, cfg.problem, None, opts))
        _eig_profile(cfg, mesh, eig1, report)
        lam2, path2 = stages.run(
            "eigen_second",
            lambda: spectral.second_eigenvalue_minimax(mesh, cfg.problem, opts, u1=eig1.u))
        report.lambda2_estimate = lam2
        report.diagnostics["lambda2_path"] = {
            "states": int(path2.states.shape[0]),
            "max_index": path2.max_index,
            "max_energy": float(np.max(path2.energies)),
        }
    except FplapError as exc:
        _record_error(report, exc)
    return report


def run_oracle(cfg: ExperimentConfig, progress=None) -> RunReport:
    """Enumerate solutions between the truncated-energy minimizers (n <= 8)."""
    report = RunReport(kind="oracle", config=cfg.echo(), backend=fplap.kernels.backend())
    stages = _Stages(report, progress)
    try:
        if cfg.problem.n > 8:
            raise ParameterError(
                f"the oracle verb needs n <= 8 (brute-force enumeration), got n = "
                f"{cfg.problem.n}"
            )
        mesh, opts, eig1, _lam2, _path2, r = _common_head(
            cfg, report, stages, cfg.mu_relative_to == "lambda2")
        u_plus, u_minus = _extremal_stages(cfg, report, stages, mesh, opts, eig1, r)

        def enum():
            pair = lattice.interval_pair(mesh, cfg.problem, r, u_minus.u, u_plus.u)
            return lattice.enumerate_solutions(mesh, cfg.problem, r, pair,
                                               starts=cfg.oracle_starts, opts=opts)

        sols = stages.run("enumerate", enum)
        members = []
        for i, m in enumerate(sols.members):
            name = f"member_{i:02d}"
            report.profiles[name] = _profile_entry(cfg, mesh, m, name)
            report.profile_values[name] = m.u
            members.append({"profile": name, "energy": m.energy,
                            "classification": m.classification})
        report.oracle = {"count": len(members), "complete_flag": sols.complete_flag,
                         "members": members}
    except FplapError as exc:
        _record_error(report, exc)
    return report


def _record_error(report: RunReport, exc: FplapError):
    report.status = "error"
    stage = next(reversed(report.timings), "setup")
    report.error = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
    report.exception = exc


def _format_sig(x: float) -> str:
    return f"{x:.17g}"


def _profile_csv(mesh_nodes, dist, s, values) -> str:
    ratio = values / dist**s
    lines = ["x,value,dist_s_ratio"]
    for x, v, rt in zip(mesh_nodes, values, ratio):
        lines.append(f"{_format_sig(x)},{_format_sig(v)},{_format_sig(rt)}")
    return "\n".join(lines) + "\n"


def emit_outputs(report: RunReport, out_dir=None, progress=None) -> Path:
    """Write the run directory atomically (stage, then rename); returns its path.

    Rerunning with the same config and seed reproduces every profile CSV
    byte for byte; wall-clock timings live only in report.json.
    """
    base = Path(out_dir if out_dir is not None else report.config["outputs"]["dir"])
    base.mkdir(parents=True, exist_ok=True)
    run_id = report.run_id()
    target = base / run_id
    staging = base / f".{run_id}.staging"
    if staging.exists():
        shutil.rmtree(staging)
    prob = report.config["problem"]
    params = ProblemParams(p=prob["p"], s=prob["s"], a=prob["a"], b=prob["b"],
                           n=prob["n"], c0=prob["c0"], q=prob["q"])
    mesh = build_mesh(params)
    try:
        staging.mkdir()
        for name, values in report.profile_values.items():
            csv_text = _profile_csv(mesh.nodes, mesh.dist, params.s, values)
            (staging / f"{name}.csv").write_text(csv_text)
            if report.config["outputs"]["plot_files"]:
                cols = "\n".join(f"{_format_sig(x)} {_format_sig(v)}"
                                 for x, v in zip(mesh.nodes, values))
                (staging / f"{name}.dat").write_text(cols + "\n")
        (staging / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        if target.exists():
            if not (target / "report.json").exists():
                raise ParameterError(
                    f"refusing to overwrite {target}: not a run directory"
                )
            shutil.rmtree(target)
        os.replace(staging, target)
    finally:
        if staging.exists():
            shutil.rmtree(staging)
    if progress:
        progress(f"[{run_id}] wrote {target}")
    return target


@dataclass
class VerifyReport:
    ok: bool
    checks: list
    mismatches: list


def _check(checks, mismatches, label, stored, recomputed, tol=1e-12):
    err = abs(recomputed - stored) / max(1.0, abs(stored))
    (checks if err <= tol else mismatches).append(
        f"{label}: stored {stored!r}, recomputed {recomputed!r}"
    )


def verify_run(run_dir) -> VerifyReport:
    """Recompute every residual/energy/ratio claim of a run from its files."""
    run_dir = Path(run_dir)
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise ParameterError(f"no report.json under {run_dir}")
    data = json.loads(report_path.read_text())
    prob = data["config"]["problem"]
    params = ProblemParams(p=prob["p"], s=prob["s"], a=prob["a"], b=prob["b"],
                           n=prob["n"], c0=prob["c0"], q=prob["q"])
    mesh = build_mesh(params)
    checks, mismatches = [], []

    reaction = None
    if data.get("resolved_mu") is not None:
        reaction = ModelReaction(p=params.p, q=data["config"]["reaction"]["q"],
                                 mu=data["resolved_mu"],
                                 kappa=data["config"]["reaction"]["kappa"])

    for name, meta in sorted(data.get("profiles", {}).items()):
        csv_path = run_dir / meta["csv"]
        if not csv_path.exists():
            mismatches.append(f"{name}: missing profile file {meta['csv']}")
            continue
        table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        x, values, ratio = table[:, 0], table[:, 1], table[:, 2]
        if x.shape[0] != mesh.n or float(np.max(np.abs(x - mesh.nodes))) > 1e-12:
            mismatches.append(f"{name}: node column disagrees with the config mesh")
            continue
        _check(checks, mismatches, f"{name}.dist_s_ratio",
               float(np.max(np.abs(ratio))),
               float(np.max(np.abs(values / mesh.dist**params.s))))
        if name == "u1":
            lam = meta["lam"]
            res = operator.apply(mesh, params, values) - lam * operator.phi_p(values,
                                                                              params.p)
            _check(checks, mismatches, "u1.residual_inf", meta["residual_inf"],
                   float(np.max(np.abs(res))))
            norm = mesh.h * float(np.sum(np.abs(values) ** params.p))
            _check(checks, mismatches, "u1.normalization", meta["normalization"], norm)
        elif reaction is not None:
            func = Functional(mesh, params, reaction)
            _check(checks, mismatches, f"{name}.residual_inf", meta["residual_inf"],
                   float(np.max(np.abs(func.residual(values)))))
            _check(checks, mismatches, f"{name}.energy", meta["energy"],
                   func.value(values))
    return VerifyReport(ok=not mismatches, checks=checks, mismatches=mismatches)
