"""Step-size scaling experiments.

Two error channels are measured against step size on a log-log grid:

* First-order one-step error: one gradient-frozen step against a path-shared
  fine integration of the continuous flow from the same start (the fine path
  reuses the coarse step's Brownian increments, subdivided). The mean squared
  gap scales like delta^3 * d once the noise term dominates, with a delta^4
  drift-only floor.

* Second-order gradient-freeze error: along the exact-kernel chain, the mean
  squared gap between consecutive-state gradients, which the frozen-gradient
  drift incurs within each step. Scales like delta^2 with a very loose
  closed-form ceiling 1e9 L^2 delta^2 (R^2 + d/m).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .potentials import PotentialModel
from .underdamped import C_ABS, KernelCoeffs, ud_update
from .slopes import fit_loglog_slope
from . import streams


@dataclass
class ScalingReport:
    deltas: list
    errors: list
    slope: float | None
    intercept: float | None
    kind: str
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def od_one_step_errors(potential: PotentialModel, x0, deltas, ensemble: int,
                       seed: int, ref_refine: int = 256,
                       noise_scale: float = 1.0) -> np.ndarray:
    """E||one frozen-gradient step - path-shared fine flow||^2 per delta."""
    x0 = np.asarray(x0, dtype=float).reshape(potential.dim)
    d = potential.dim
    errors = np.empty(len(deltas))
    root = np.random.SeedSequence(int(seed))
    children = root.spawn(len(deltas))
    for i, (delta, child) in enumerate(zip(deltas, children)):
        rng = np.random.default_rng(child)
        fine = math.sqrt(delta / ref_refine) * noise_scale \
            * rng.standard_normal((ref_refine, ensemble, d))
        start = np.tile(x0, (ensemble, 1))
        g0 = potential.gradient(start)
        coarse = start - delta * g0 + math.sqrt(2.0) * fine.sum(axis=0)
        xr = start.copy()
        h = delta / ref_refine
        for j in range(ref_refine):
            xr = xr - h * potential.gradient(xr) + math.sqrt(2.0) * fine[j]
        errors[i] = float(np.mean(np.sum((coarse - xr) ** 2, axis=1)))
    return errors


def od_discretization_sweep(potential: PotentialModel, x0, deltas, ensemble: int,
                            seed: int, ref_refine: int = 256,
                            noise_scale: float = 1.0) -> ScalingReport:
    """Log-log scan of the first-order one-step error against delta."""
    deltas = sorted(float(d) for d in deltas)[::-1]
    notes = []
    cap = potential.m_convex / (512.0 * potential.l_smooth**2)
    over = [d for d in deltas if d > cap]
    if over:
        notes.append(f"{len(over)} grid point(s) exceed the delta <= m/(512 L^2) "
                     f"= {cap:.3e} precondition; the bound is not guaranteed there")
    errors = od_one_step_errors(potential, x0, deltas, ensemble, seed,
                                ref_refine, noise_scale)
    slope = intercept = None
    if len(deltas) >= 2 and np.all(errors > 0):
        slope, intercept = fit_loglog_slope(deltas, errors)
    else:
        notes.append("insufficient points for a slope fit")
    return ScalingReport(list(deltas), errors.tolist(), slope, intercept,
                         kind="od-one-step",
                         warnings=notes,
                         extras={"ensemble": ensemble, "seed": seed,
                                 "ref_refine": ref_refine,
                                 "noise_scale": noise_scale})


@dataclass
class FreezeErrorReport:
    passed: bool
    delta: float
    observed_mean: float
    observed_max: float
    bound: float
    ratio: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def ud_freeze_gap_series(potential: PotentialModel, delta: float, horizon: float,
                         ensemble: int, seed: int, c_abs: float = C_ABS) -> np.ndarray:
    """Per-step mean of ||grad U(x_{k+1}) - grad U(x_k)||^2 along the
    exact-kernel chain from (0, 0); the end-of-step state is where the frozen
    gradient is stalest."""
    d = potential.dim
    n = max(1, int(math.ceil(horizon / delta)))
    co = KernelCoeffs.make(delta, c_abs * potential.kappa * potential.l_smooth)
    gens = streams.member_generators(seed, ensemble)
    x = np.zeros((ensemble, d))
    u = np.zeros((ensemble, d))
    out = np.empty(n)
    chunk = streams.chunk_steps(n, ensemble, 2 * d)
    k = 0
    while k < n:
        take = min(chunk, n - k)
        noise = streams.stacked_normals(gens, take, 2 * d)
        for j in range(take):
            _, g_prev = potential.value_and_grad(x)
            x, u, _ = ud_update(x, u, g_prev, co, noise[j, :, :d], noise[j, :, d:])
            _, g_new = potential.value_and_grad(x)
            out[k] = float(np.mean(np.sum((g_new - g_prev) ** 2, axis=1)))
            k += 1
    return out


def ud_velocity_moment_check(potential: PotentialModel, delta: float,
                             horizon: float, ensemble: int, seed: int,
                             c_abs: float = C_ABS) -> FreezeErrorReport:
    """Check the freeze-gap second moment against the closed-form ceiling
    1e9 L^2 delta^2 (R^2 + d/m); also records the (much smaller) observed
    constant."""
    cap = 1.0 / (12000.0 * potential.kappa)
    extras = {}
    if delta > cap:
        warnings.warn(f"delta={delta:g} exceeds the 1/(12000 kappa)={cap:.3e} "
                      "precondition; the ceiling is not guaranteed", stacklevel=2)
        extras["precondition_violated"] = True
    series = ud_freeze_gap_series(potential, delta, horizon, ensemble, seed, c_abs)
    bound = (1e9 * potential.l_smooth**2 * delta**2
             * (potential.radius**2 + potential.dim / potential.m_convex))
    observed_max = float(series.max())
    observed_mean = float(series.mean())
    extras["observed_constant"] = observed_max / (
        potential.l_smooth**2 * delta**2
        * (potential.radius**2 + potential.dim / potential.m_convex))
    return FreezeErrorReport(passed=observed_max <= bound, delta=float(delta),
                             observed_mean=observed_mean, observed_max=observed_max,
                             bound=bound, ratio=observed_max / bound, extras=extras)


def ud_discretization_sweep(potential: PotentialModel, deltas, horizon: float,
                            ensemble: int, seed: int,
                            c_abs: float = C_ABS) -> ScalingReport:
    """Log-log scan of the gradient-freeze error against delta, with the
    closed-form ceiling checked at every grid point."""
    deltas = sorted(float(d) for d in deltas)[::-1]
    notes = []
    errors = []
    below_bound = True
    root = np.random.SeedSequence(int(seed))
    for delta, child in zip(deltas, root.spawn(len(deltas))):
        rep = ud_velocity_moment_check(potential, delta, horizon, ensemble,
                                       int(child.generate_state(1)[0] % 2**31), c_abs)
        errors.append(rep.observed_mean)
        below_bound &= rep.observed_max <= rep.bound
    slope = intercept = None
    if len(deltas) >= 2 and all(e > 0 for e in errors):
        slope, intercept = fit_loglog_slope(deltas, errors)
    else:
        notes.append("insufficient points for a slope fit")
    return ScalingReport(list(deltas), errors, slope, intercept,
                         kind="ud-freeze-gap", warnings=notes,
                         extras={"ensemble": ensemble, "seed": seed,
                                 "horizon": horizon, "all_below_bound": below_bound})
