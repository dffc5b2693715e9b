"""Experiment orchestration: config parsing, dispatch, persistence, plots.

Configs are TOML (human-edited), reports are JSON, traces are CSV. All file
writes go through a temp-file-plus-rename so an interrupted run never leaves
a half-written artifact. Every random draw in an experiment descends from the
single config seed.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, asdict

import numpy as np
import tomli
import toml

from . import __version__
from .potentials import PotentialModel, make_potential, audit_constants
from .distance_fn import DistanceFn
from .overdamped import plan_overdamped, od_run
from .underdamped import C_ABS, plan_underdamped, ud_run
from .metrics import w1_sliced, second_moment_check
from .reference import target_reference
from .coupling import (CouplingConstants, lyapunov_fn, od_pair_init,
                       od_coupled_run, stationary_pair_init, ud_coupling_init,
                       ud_coupled_run, check_jump_nonpositive)
from .discretization import od_discretization_sweep, ud_discretization_sweep
from .slopes import fit_exp_rate

SAMPLERS = ("od", "ud", "coupled-od", "coupled-ud",
            "discretization-od", "discretization-ud")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    potential: dict
    sampler: str
    seed: int = 0
    epsilon: float | None = None
    ensemble: int = 1024
    out: str | None = None
    # overrides; None means "use the planner / defaults"
    delta: float | None = None
    n: int | None = None
    substep: float | None = None
    projections: int = 128
    scale: float = 1.0
    c_abs: float = C_ABS
    horizon: float | None = None
    deltas: list = field(default_factory=list)
    reference_n: int = 100_000
    x0: list = field(default_factory=list)
    checkpoints: int = 24
    emit_velocities: bool = False

    def to_toml(self) -> str:
        data = {k: v for k, v in asdict(self).items() if v is not None}
        return toml.dumps(data)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "potential" not in data:
            raise ConfigError("missing required field: potential")
        if "sampler" not in data:
            raise ConfigError("missing required field: sampler")
        if data["sampler"] not in SAMPLERS:
            raise ConfigError(f"sampler: expected one of {SAMPLERS}, got {data['sampler']!r}")
        known = {f for f in cls.__dataclass_fields__}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown field: {key}")
        cfg = cls(**data)
        try:
            cfg.seed = int(cfg.seed)
        except (TypeError, ValueError):
            raise ConfigError("seed: must be an integer") from None
        if abs(cfg.seed) >= 2**63:
            raise ConfigError("seed: must fit in 64 bits")
        if cfg.sampler in ("od", "ud") and cfg.epsilon is None and cfg.delta is None:
            raise ConfigError(f"sampler {cfg.sampler}: needs epsilon (for the planner) or a delta/n override")
        if cfg.sampler == "discretization-od" and not cfg.deltas:
            raise ConfigError("sampler discretization-od: needs a deltas list")
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"TOML parse error: {e}") from None
        return cls.from_dict(data)


@dataclass
class ExperimentReport:
    config: dict
    sampler: str
    passed: bool
    planner: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    estimates: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    wallclock_s: float = 0.0
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def atomic_write(path: str, text: str) -> None:
    """Write text to path via temp file + rename (atomic on POSIX)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: dict[str, np.ndarray]) -> str:
    names = list(columns)
    rows = np.column_stack([np.asarray(columns[c], dtype=float) for c in names])
    lines = [",".join(names)]
    lines += [",".join(f"{v:.10g}" for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _default_x0(potential: PotentialModel, cfg: ExperimentConfig) -> np.ndarray:
    if cfg.x0:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.shape != (potential.dim,):
            raise ConfigError(f"x0: expected {potential.dim} coordinates, got {x0.shape}")
        return x0
    return np.zeros(potential.dim)


def _checkpoint_steps(n: int, how_many: int) -> list[int]:
    if n <= 1:
        return [n]
    pts = np.unique(np.geomspace(1, n, num=min(how_many, n)).astype(int))
    return pts.tolist()


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> ExperimentReport:
    """Dispatch; writes <sampler>.report.json (and trace CSVs) when out_dir
    or cfg.out names a destination."""
    start = time.time()
    potential = make_potential(cfg.potential)
    report = ExperimentReport(config=json.loads(json.dumps(asdict(cfg))),
                              sampler=cfg.sampler, passed=True)
    traces: dict[str, str] = {}

    if cfg.sampler in ("od", "ud"):
        _run_sampler_experiment(cfg, potential, report, traces)
    elif cfg.sampler == "coupled-od":
        _run_coupled_od(cfg, potential, report, traces)
    elif cfg.sampler == "coupled-ud":
        _run_coupled_ud(cfg, potential, report, traces)
    elif cfg.sampler == "discretization-od":
        rep = od_discretization_sweep(potential, _default_x0(potential, cfg),
                                      cfg.deltas, cfg.ensemble, cfg.seed)
        report.checks["sweep"] = rep.to_dict()
        traces["sweep.csv"] = _csv_text({"delta": rep.deltas, "error": rep.errors})
    elif cfg.sampler == "discretization-ud":
        deltas = cfg.deltas or np.geomspace(1.0 / (12000.0 * potential.kappa) / 30,
                                            1.0 / (12000.0 * potential.kappa), 6).tolist()
        rep = ud_discretization_sweep(potential, deltas, cfg.horizon or 0.2,
                                      cfg.ensemble, cfg.seed, cfg.c_abs)
        report.checks["sweep"] = rep.to_dict()
        report.passed = bool(rep.extras.get("all_below_bound", True))
        traces["sweep.csv"] = _csv_text({"delta": rep.deltas, "error": rep.errors})

    report.wallclock_s = time.time() - start
    destination = out_dir or cfg.out
    if destination:
        base = os.path.join(destination, cfg.sampler.replace("-", "_"))
        atomic_write(base + ".report.json", report.to_json())
        atomic_write(base + ".config.toml", cfg.to_toml())
        for name, text in traces.items():
            atomic_write(base + "." + name, text)
    return report


def _run_sampler_experiment(cfg, potential, report, traces):
    x0 = _default_x0(potential, cfg)
    if cfg.epsilon is not None:
        plan = (plan_overdamped if cfg.sampler == "od" else plan_underdamped)(
            potential, cfg.epsilon, scale=cfg.scale)
        report.planner = plan.to_dict()
        if not plan.feasible and cfg.delta is None:
            report.checks["note"] = ("planned step/iteration count not representable; "
                                     "run skipped (supply delta/n overrides to force)")
            return
        if cfg.n is None and plan.n * cfg.ensemble > 2e10:
            report.checks["note"] = (f"planned n = {plan.n:.3e} is beyond desk scale "
                                     "at this ensemble size; run skipped (supply "
                                     "delta/n overrides or a scale relaxation)")
            return
        delta = cfg.delta if cfg.delta is not None else plan.delta
        n = cfg.n if cfg.n is not None else plan.n
    else:
        delta, n = cfg.delta, cfg.n or 1000
    marks = _checkpoint_steps(n, cfg.checkpoints)
    if cfg.sampler == "od":
        samples, info = od_run(potential, x0, delta, n, cfg.ensemble, cfg.seed,
                               checkpoints=marks)
    else:
        samples, info = ud_run(potential, x0, delta, n, cfg.ensemble, cfg.seed,
                               c_abs=cfg.c_abs, checkpoints=marks,
                               return_velocities=cfg.emit_velocities)
        report.counts["psd_clamps"] = info["psd_clamps"]
    ref = target_reference(potential, max(cfg.reference_n, cfg.ensemble), cfg.seed + 1)
    sub = ref[:cfg.ensemble]
    series_w1 = []
    for step in marks:
        est = w1_sliced(info["checkpoints"][step], sub, cfg.projections,
                        seed=cfg.seed + 2, n_boot=0)
        series_w1.append(est.value)
    final = w1_sliced(samples, sub, cfg.projections, seed=cfg.seed + 2, n_boot=100)
    report.series["steps"] = marks
    report.series["sliced_w1"] = series_w1
    report.estimates.append(final.to_dict())
    report.checks["second_moment"] = second_moment_check(samples, potential).to_dict()
    report.counts["steps"] = n
    report.counts["ensemble"] = cfg.ensemble
    traces["w1.csv"] = _csv_text({"step": marks, "sliced_w1": series_w1})
    if cfg.emit_velocities and cfg.sampler == "ud":
        vel = info["velocities"]
        traces["samples.csv"] = _csv_text(
            {**{f"x{i}": samples[:, i] for i in range(samples.shape[1])},
             **{f"u{i}": vel[:, i] for i in range(vel.shape[1])}})
    else:
        traces["samples.csv"] = _csv_text(
            {f"x{i}": samples[:, i] for i in range(samples.shape[1])})


def _run_coupled_od(cfg, potential, report, traces):
    fn = DistanceFn(potential.l_smooth / 4.0, potential.radius)
    ref = target_reference(potential, cfg.ensemble, cfg.seed + 1)
    x0 = _default_x0(potential, cfg)
    x, y, meta = od_pair_init(x0, ref)
    substep = cfg.substep or 0.01
    horizon = cfg.horizon or 5.0
    res = od_coupled_run(potential, x, y, substep, int(horizon / substep),
                         cfg.seed, fn=fn, record_every=max(1, int(0.05 / substep)))
    rate, intercept = fit_exp_rate(res.times, res.mean_f)
    bound = math.exp(-potential.l_smooth * potential.radius**2 / 4.0) \
        * min(4.0 / potential.radius**2 if potential.radius > 0 else math.inf,
              potential.m_convex / 2.0)
    report.series["times"] = res.times
    report.series["mean_f"] = res.mean_f
    report.series["merged_frac"] = res.merged_frac
    report.checks["fitted_rate"] = rate
    report.checks["reference_rate"] = -bound
    report.checks["metadata"] = {**res.metadata, **meta}
    report.passed = rate < 0
    traces["trace.csv"] = _csv_text({"t": res.times, "mean_f": res.mean_f,
                                     "mean_r": res.mean_r,
                                     "merged_frac": res.merged_frac})


def _run_coupled_ud(cfg, potential, report, traces):
    consts = CouplingConstants.for_potential(potential, cfg.c_abs)
    fn = lyapunov_fn(potential)
    ref = target_reference(potential, cfg.ensemble, cfg.seed + 1)
    y, v = stationary_pair_init(potential, ref, cfg.seed + 2, cfg.c_abs)
    x0 = cfg.x0 or (potential.radius * np.eye(potential.dim)[0]).tolist()
    state = ud_coupling_init(np.asarray(x0, dtype=float), y, v, consts)
    delta = cfg.delta or 0.02
    spd = max(1, int(round(delta / cfg.substep))) if cfg.substep else 10
    horizon = cfg.horizon or 1.35 * consts.t_sync
    res = ud_coupled_run(potential, state, consts, fn, delta, spd,
                         max(1, int(horizon / delta)), cfg.seed + 3)
    violations = check_jump_nonpositive(res.events, fn, consts)
    report.series["times"] = res.times
    report.series["mean_lyap"] = res.mean_lyap
    report.series["mean_dist"] = res.mean_dist
    report.series["frac_reflect"] = res.frac_reflect
    report.checks["jump_violations"] = len(violations)
    report.checks["switch_events"] = int(res.events.member.size)
    report.checks["max_reflect_dist"] = res.max_reflect_dist
    report.checks["ball_radius"] = math.sqrt(5.0) * potential.radius
    report.checks["min_xi"] = res.min_xi
    report.checks["constants"] = asdict(consts)
    report.passed = (not violations
                     and res.max_reflect_dist <= math.sqrt(5.0) * potential.radius + 1e-9
                     and res.min_xi >= -1e-15)
    traces["trace.csv"] = _csv_text(res.tracked)
    traces["ensemble.csv"] = _csv_text({
        "t": res.times, "mean_lyap": res.mean_lyap, "mean_dist": res.mean_dist,
        "frac_reflect": res.frac_reflect, "mean_xi": res.mean_xi})


def run_audit(potential_block: dict, pair_budget: int, seed: int):
    return audit_constants(make_potential(potential_block), pair_budget, seed)


def emit_plots(report_path: str, out_dir: str | None = None) -> list[str]:
    """SVG plots for a report: convergence curves on a log scale, or
    slope-annotated log-log scatter for sweeps. Missing series are skipped
    with a warning string in the returned list's place."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(report_path) as fh:
        rep = json.load(fh)
    out_dir = out_dir or os.path.dirname(os.path.abspath(report_path))
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, os.path.basename(report_path).replace(".report.json", ""))
    written = []

    series = rep.get("series", {})
    if "sliced_w1" in series and series["sliced_w1"]:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(series["steps"], np.maximum(series["sliced_w1"], 1e-12), marker="o")
        ax.set_xlabel("iteration")
        ax.set_ylabel("sliced W1 to reference")
        ax.set_title(rep.get("sampler", ""))
        path = stem + ".convergence.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    if "mean_lyap" in series and len(series.get("mean_lyap", [])):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(series["times"], np.maximum(series["mean_lyap"], 1e-12))
        ax.set_xlabel("t")
        ax.set_ylabel("mean switched Lyapunov value")
        path = stem + ".lyapunov.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    if "mean_f" in series and len(series.get("mean_f", [])):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(series["times"], np.maximum(series["mean_f"], 1e-15))
        ax.set_xlabel("t")
        ax.set_ylabel("mean warped separation")
        path = stem + ".contraction.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    sweep = rep.get("checks", {}).get("sweep")
    if sweep and sweep.get("errors"):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.loglog(sweep["deltas"], sweep["errors"], marker="o")
        if sweep.get("slope") is not None:
            ax.set_title(f"fitted slope {sweep['slope']:.3f}")
        ax.set_xlabel("step size")
        ax.set_ylabel("mean squared error")
        path = stem + ".sweep.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    if not written:
        written.append(f"warning: no plottable series in {report_path}")
    return written
