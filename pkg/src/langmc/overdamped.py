"""First-order Langevin MCMC: the gradient step with sqrt(2*delta) noise,
plus the planner that turns (potential constants, accuracy) into a step size
and iteration count with a worst-case W1 guarantee.

The planner bound is exponential in L*R^2 (the price of nonconvexity inside
the ball), so it is evaluated in log domain and reports infeasibility instead
of overflowing silently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .potentials import PotentialModel
from . import streams

# natural-log magnitude beyond which a planned quantity is not representable
LOG_FEASIBLE_LIMIT = 700.0


@dataclass
class OverdampedPlan:
    delta: float
    n: int
    n_raw: float          # iteration bound before the ceiling
    r_bar_sq: float
    epsilon: float
    feasible: bool
    log_delta: float
    log_n: float
    scale: float = 1.0
    note: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _constants(potential: PotentialModel) -> tuple[float, float, float]:
    return potential.l_smooth, potential.m_convex, potential.radius


def plan_overdamped_constants(l_smooth: float, m_convex: float, radius: float,
                              d: int, epsilon: float, scale: float = 1.0) -> OverdampedPlan:
    """Step size (min of the two caps) and iteration count for the
    first-order sampler, from raw constants.

    scale multiplies delta and divides n for desk-scale runs; scale=1 is the
    guaranteed regime.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    L, m, R = float(l_smooth), float(m_convex), float(radius)
    lr2 = L * R * R
    r_bar_sq = max(R * R, 8.0 / m)
    spread = R * R + d / m
    ln_eps = math.log(epsilon)

    ln_cap1 = 2.0 * ln_eps - lr2 - math.log(64.0 * L * L * r_bar_sq**2 * d)
    ln_cap2 = (ln_eps - 0.5 * lr2
               - math.log(2.0 * L * L * r_bar_sq * math.sqrt(60.0 * R * R + 6.0 * d / m)))
    ln_delta = min(ln_cap1, ln_cap2)

    log_term = math.log(24.0) + 0.25 * lr2 + 0.5 * math.log(spread) - ln_eps
    note = ""
    if log_term <= 0:
        log_term = 1.0
        note = "target accuracy so loose the log factor went nonpositive; clamped to 1"
    ln_a = math.log(64.0) + 1.25 * lr2 + 3.0 * math.log(r_bar_sq) + math.log(d) - 2.0 * ln_eps
    ln_b = (math.log(16.0) + 0.75 * lr2 + math.log(r_bar_sq)
            + 0.5 * math.log(spread) - ln_eps)
    ln_n = 2.0 * math.log(L) + max(ln_a, ln_b) + math.log(log_term)

    ln_delta += math.log(scale)
    ln_n -= math.log(scale)

    feasible = abs(ln_delta) <= LOG_FEASIBLE_LIMIT and ln_n <= LOG_FEASIBLE_LIMIT
    if not feasible and not note:
        note = (f"bound not representable: ln(delta)={ln_delta:.1f}, ln(n)={ln_n:.1f} "
                f"(limit {LOG_FEASIBLE_LIMIT:.0f})")
    delta = math.exp(ln_delta) if ln_delta > -LOG_FEASIBLE_LIMIT else 0.0
    n_raw = math.exp(ln_n) if ln_n <= LOG_FEASIBLE_LIMIT else math.inf
    n = int(math.ceil(n_raw)) if math.isfinite(n_raw) else 0
    if delta >= 1.0:
        note = (note + "; " if note else "") + "cap exceeded the delta < 1 contract; clipped"
        delta = 0.999

    # second cap as the proof's tighter constants carry it (4x smaller); the
    # first cap is identical in both parameterizations
    big_m = max(R * R / 4.0, 2.0 / m)
    ln_cap2_proof = (ln_eps - 0.5 * lr2
                     - math.log(32.0 * L * L * big_m * math.sqrt(60.0 * R * R + 6.0 * d / m)))
    return OverdampedPlan(delta=delta, n=n, n_raw=n_raw, r_bar_sq=r_bar_sq,
                          epsilon=float(epsilon), feasible=feasible,
                          log_delta=ln_delta, log_n=ln_n, scale=float(scale), note=note,
                          extras={"ln_cap1": ln_cap1, "ln_cap2": ln_cap2,
                                  "ln_cap2_proof_constants": ln_cap2_proof})


def plan_overdamped(potential: PotentialModel, epsilon: float,
                    d: int | None = None, scale: float = 1.0) -> OverdampedPlan:
    L, m, R = _constants(potential)
    return plan_overdamped_constants(L, m, R, potential.dim if d is None else d,
                                     epsilon, scale)


@dataclass
class ChainState:
    x: np.ndarray
    step_index: int
    rng: np.random.Generator


def od_update(x: np.ndarray, grad: np.ndarray, delta: float, noise: np.ndarray) -> np.ndarray:
    """x - delta * grad + sqrt(2 delta) * noise (the one-step kernel mean/noise)."""
    return x - delta * grad + math.sqrt(2.0 * delta) * noise


def od_step(potential: PotentialModel, state: ChainState, delta: float,
            noise: np.ndarray | None = None) -> ChainState:
    """Advance one chain by a single step; noise=0 is the drift-only hook."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _, grad = potential.evaluate(state.x)
    if not np.all(np.isfinite(grad)):
        bad = int(np.argmax(~np.isfinite(np.atleast_1d(grad))))
        raise FloatingPointError(f"non-finite gradient in coordinate {bad}")
    xi = state.rng.standard_normal(state.x.shape) if noise is None else np.asarray(noise, float)
    return ChainState(od_update(state.x, grad, delta, xi), state.step_index + 1, state.rng)


def od_run(potential: PotentialModel, x0, delta: float, n: int, ensemble: int,
           seed: int, checkpoints=None) -> tuple[np.ndarray, dict]:
    """Run `ensemble` independent chains for n steps from the common start x0.

    Member i consumes its own seeded stream, so outputs are reproducible
    bit-for-bit and independent of the ensemble size. Returns the final
    (ensemble, d) positions and a dict of checkpointed snapshots.
    """
    if delta <= 0 or n < 0 or ensemble < 1:
        raise ValueError("need delta > 0, n >= 0, ensemble >= 1")
    x0 = np.asarray(x0, dtype=float).reshape(potential.dim)
    if np.linalg.norm(x0) > potential.radius:
        warnings.warn("start lies outside the declared ball; the W1 guarantee "
                      "assumes ||x0|| <= R", stacklevel=2)
    checkpoints = sorted(set(int(c) for c in (checkpoints or [])))
    gens = streams.member_generators(seed, ensemble)
    x = np.tile(x0, (ensemble, 1))
    snaps: dict[int, np.ndarray] = {}
    if 0 in checkpoints:
        snaps[0] = x.copy()

    d = potential.dim
    chunk = streams.chunk_steps(n, ensemble, d)
    step = 0
    while step < n:
        take = min(chunk, n - step)
        noise = streams.stacked_normals(gens, take, d)
        for j in range(take):
            _, grad = potential.value_and_grad(x)
            x = od_update(x, grad, delta, noise[j])
            step += 1
            if step in snaps or step in checkpoints:
                snaps[step] = x.copy()
    return x, {"checkpoints": snaps}


def od_plan_run(potential: PotentialModel, x0, plan: OverdampedPlan,
                ensemble: int, seed: int, checkpoints=None):
    if not plan.feasible:
        raise ValueError(f"plan is infeasible: {plan.note}")
    return od_run(potential, x0, plan.delta, plan.n, ensemble, seed, checkpoints)
