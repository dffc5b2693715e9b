"""Command-line front end.

Subcommands: plan, sample (od|ud), couple (od|ud), sweep (od|ud), audit,
run (full experiment config), plot. Exit codes: 0 success / documented
infeasibility, 1 usage error, 2 assertion (experiment check) failure.
"""

from __future__ import annotations

import json
import os
import sys
import click
import numpy as np

from .potentials import load_potential, audit_constants
from .overdamped import plan_overdamped, od_run
from .underdamped import plan_underdamped, ud_run, C_ABS
from .harness import (ConfigError, ExperimentConfig, atomic_write,
                      emit_plots, run_experiment, _csv_text)

OUT_ENV = "LANGMC_OUTDIR"

# exit-code contract: 0 pass, 1 usage error, 2 failed experiment check
click.UsageError.exit_code = 1


def _outdir(path: str | None) -> str:
    return path or os.environ.get(OUT_ENV, ".")


@click.group()
def main():
    """Langevin MCMC toolkit for smooth, outside-a-ball strongly convex targets."""


@main.command()
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--sampler", type=click.Choice(["od", "ud"]), default="od")
@click.option("--eps", type=float, required=True)
@click.option("--d", "dim", type=int, default=None, help="override the potential's dimension")
@click.option("--scale", type=float, default=1.0, help="practical-mode relaxation of the bound constants")
def plan(potential_path, sampler, eps, dim, scale):
    """Print the planned (delta, n) for a target W1 accuracy."""
    pot = load_potential(potential_path)
    planner = plan_overdamped if sampler == "od" else plan_underdamped
    p = planner(pot, eps, d=dim, scale=scale)
    click.echo(json.dumps(p.to_dict(), indent=2))


@main.group()
def sample():
    """Draw ensembles with the first- or second-order sampler."""


def _sample_common(kind, potential_path, eps, seed, ensemble, out, delta, n,
                   scale, emit_velocities=False, c_abs=C_ABS):
    pot = load_potential(potential_path)
    planner = plan_overdamped if kind == "od" else plan_underdamped
    plan_dict = None
    if delta is None or n is None:
        if eps is None:
            raise click.UsageError("need --eps (planner) or both --delta and --n")
        p = planner(pot, eps, scale=scale)
        plan_dict = p.to_dict()
        if not p.feasible:
            click.echo(json.dumps({"feasible": False, "plan": plan_dict}, indent=2))
            click.echo("planned values not representable; supply --delta/--n to force a run",
                       err=True)
            return
        if n is None and p.n * ensemble > 2e10:
            click.echo(json.dumps({"feasible": True, "runnable": False,
                                   "plan": plan_dict}, indent=2))
            click.echo(f"planned n = {p.n:.3e} x ensemble {ensemble} is beyond "
                       "desk scale; supply --delta/--n overrides or a --scale "
                       "relaxation", err=True)
            return
        delta = delta if delta is not None else p.delta
        n = n if n is not None else p.n
    x0 = np.zeros(pot.dim)
    if kind == "od":
        samples, _ = od_run(pot, x0, delta, n, ensemble, seed)
        vel = None
    else:
        samples, info = ud_run(pot, x0, delta, n, ensemble, seed, c_abs=c_abs,
                               return_velocities=emit_velocities)
        vel = info.get("velocities")
    cols = {f"x{i}": samples[:, i] for i in range(samples.shape[1])}
    if vel is not None:
        cols.update({f"u{i}": vel[:, i] for i in range(vel.shape[1])})
    atomic_write(out, _csv_text(cols))
    sidecar = {"sampler": kind, "delta": delta, "n": int(n), "seed": seed,
               "ensemble": ensemble, "plan": plan_dict}
    atomic_write(out + ".plan.json", json.dumps(sidecar, indent=2))
    click.echo(f"wrote {ensemble} samples to {out} (plan sidecar alongside)")


@sample.command("od")
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--eps", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--ensemble", type=int, default=10_000)
@click.option("--out", required=True, type=click.Path())
@click.option("--delta", type=float, default=None)
@click.option("--n", type=int, default=None)
@click.option("--scale", type=float, default=1.0)
def sample_od(potential_path, eps, seed, ensemble, out, delta, n, scale):
    """First-order sampler ensemble -> CSV plus planner sidecar JSON."""
    _sample_common("od", potential_path, eps, seed, ensemble, out, delta, n, scale)


@sample.command("ud")
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--eps", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--ensemble", type=int, default=10_000)
@click.option("--out", required=True, type=click.Path())
@click.option("--delta", type=float, default=None)
@click.option("--n", type=int, default=None)
@click.option("--scale", type=float, default=1.0)
@click.option("--emit-velocities", is_flag=True, default=False)
@click.option("--c-abs", type=float, default=C_ABS, help="friction normalization override")
def sample_ud(potential_path, eps, seed, ensemble, out, delta, n, scale,
              emit_velocities, c_abs):
    """Second-order sampler ensemble -> CSV plus planner sidecar JSON."""
    _sample_common("ud", potential_path, eps, seed, ensemble, out, delta, n,
                   scale, emit_velocities, c_abs)


def _experiment_command(sampler_name, potential_path, out, **overrides):
    import tomli
    with open(potential_path, "rb") as fh:
        block = tomli.load(fh)
    if "potential" in block:
        block = block["potential"]
    data = {"potential": block, "sampler": sampler_name,
            **{k: v for k, v in overrides.items() if v not in (None, (), [])}}
    try:
        cfg = ExperimentConfig.from_dict(data)
        report = run_experiment(cfg, out_dir=_outdir(out))
    except ConfigError as e:
        raise click.UsageError(str(e))
    click.echo(json.dumps({"passed": report.passed, "checks": report.checks},
                          indent=2, default=str))
    if not report.passed:
        sys.exit(2)


@main.group()
def couple():
    """Coupled-pair contraction experiments."""


@couple.command("od")
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--ensemble", type=int, default=4096)
@click.option("--substep", type=float, default=0.01)
@click.option("--horizon", type=float, default=5.0)
@click.option("--out", type=click.Path(), default=None)
def couple_od(potential_path, seed, ensemble, substep, horizon, out):
    """Reflection-coupled first-order pairs; fits the contraction rate."""
    _experiment_command("coupled-od", potential_path, out, seed=seed,
                        ensemble=ensemble, substep=substep, horizon=horizon)


@couple.command("ud")
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--ensemble", type=int, default=512)
@click.option("--delta", type=float, default=0.02)
@click.option("--substep", type=float, default=None)
@click.option("--horizon", type=float, default=None)
@click.option("--c-abs", type=float, default=C_ABS)
@click.option("--out", type=click.Path(), default=None)
def couple_ud(potential_path, seed, ensemble, delta, substep, horizon, c_abs, out):
    """Switched kinetic coupling; checks switch-time jumps and the ball bound."""
    _experiment_command("coupled-ud", potential_path, out, seed=seed,
                        ensemble=ensemble, delta=delta, substep=substep,
                        horizon=horizon, c_abs=c_abs)


@main.group()
def sweep():
    """Step-size scaling experiments."""


@sweep.command("od")
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--ensemble", type=int, default=4096)
@click.option("--deltas", type=str, required=True, help="comma-separated step sizes")
@click.option("--out", type=click.Path(), default=None)
def sweep_od(potential_path, seed, ensemble, deltas, out):
    """One-step discretization error vs step size (log-log slope)."""
    _experiment_command("discretization-od", potential_path, out, seed=seed,
                        ensemble=ensemble,
                        deltas=[float(v) for v in deltas.split(",")])


@sweep.command("ud")
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--ensemble", type=int, default=512)
@click.option("--deltas", type=str, default=None)
@click.option("--horizon", type=float, default=0.2)
@click.option("--c-abs", type=float, default=C_ABS)
@click.option("--out", type=click.Path(), default=None)
def sweep_ud(potential_path, seed, ensemble, deltas, horizon, c_abs, out):
    """Gradient-freeze error vs step size, with the closed-form ceiling."""
    _experiment_command("discretization-ud", potential_path, out, seed=seed,
                        ensemble=ensemble, horizon=horizon, c_abs=c_abs,
                        deltas=[float(v) for v in deltas.split(",")] if deltas else [])


@main.command()
@click.option("--potential", "potential_path", required=True, type=click.Path(exists=True))
@click.option("--pairs", type=int, default=10_000)
@click.option("--seed", type=int, default=0)
@click.option("--json", "json_out", type=click.Path(), default=None)
def audit(potential_path, pairs, seed, json_out):
    """Empirically audit the declared (L, m, R) constants."""
    pot = load_potential(potential_path)
    rep = audit_constants(pot, pairs, seed)
    text = rep.to_json()
    if json_out:
        atomic_write(json_out, text)
    click.echo(text)
    if not rep.passed:
        sys.exit(2)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def run(config_path, out):
    """Run a full experiment described by a TOML config."""
    try:
        cfg = ExperimentConfig.from_toml(open(config_path).read())
        report = run_experiment(cfg, out_dir=_outdir(out or cfg.out))
    except ConfigError as e:
        raise click.UsageError(str(e))
    click.echo(json.dumps({"passed": report.passed,
                           "wallclock_s": round(report.wallclock_s, 3)}, indent=2))
    if not report.passed:
        sys.exit(2)


@main.command()
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def plot(report_path, out):
    """Emit SVG plots for a report JSON."""
    for item in emit_plots(report_path, out_dir=_outdir(out)):
        click.echo(item)
