"""Second-order (kinetic) Langevin MCMC via the exact one-step kernel.

Between gradient refreshes the dynamics are linear in (position, velocity),
so the one-step transition is an explicit Gaussian: its per-coordinate
mean and 2x2 covariance are evaluated in closed form and sampled through
the closed-form Cholesky factor, giving O(d) work per step. The velocity
scale is set by the absolute constant c = 1000 through the friction/gradient
normalization 1/(c * kappa * L); the invariant velocity marginal is
N(0, I/(c kappa L)).

The small-step covariance entries are differences of nearly equal
exponentials; below a threshold they switch to series evaluation so no
accuracy is lost to cancellation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .potentials import PotentialModel
from .overdamped import LOG_FEASIBLE_LIMIT
from . import streams

# the absolute constant scaling friction against the gradient; override only
# for desk-scale experiments (all derived quantities accept c_abs)
C_ABS = 1000.0

_SERIES_CUTOFF = 0.02


def velocity_variance(potential: PotentialModel, c_abs: float = C_ABS) -> float:
    """Per-coordinate variance of the invariant velocity marginal."""
    return 1.0 / (c_abs * potential.kappa * potential.l_smooth)


def _var_xx_scaled(delta: float) -> float:
    """delta - 3/4 + exp(-2 delta) - exp(-4 delta)/4, stable for small delta."""
    if delta < _SERIES_CUTOFF:
        total = 0.0
        for k in range(9, 2, -1):
            total += ((-2.0) ** k - 0.25 * (-4.0) ** k) / math.factorial(k) * delta**k
        return total
    return delta - 0.75 + math.exp(-2.0 * delta) - 0.25 * math.exp(-4.0 * delta)


def _x_drift_gap(delta: float) -> float:
    """delta - (1 - exp(-2 delta))/2, stable for small delta."""
    if delta < _SERIES_CUTOFF:
        total = 0.0
        for k in range(10, 1, -1):
            total += 0.5 * (-2.0 * delta) ** k / math.factorial(k)
        return total
    return delta - 0.5 * (-math.expm1(-2.0 * delta))


@dataclass
class KernelCoeffs:
    """Scalar pieces of the one-step Gaussian kernel at step size delta."""
    delta: float
    ckl: float             # c * kappa * L
    decay: float           # exp(-2 delta): velocity mean retention
    half_relax: float      # (1 - exp(-2 delta))/2: velocity-to-position transfer
    grad_u: float          # gradient coefficient in the velocity mean
    grad_x: float          # gradient coefficient in the position mean
    var_xx: float
    var_uu: float
    cov_xu: float

    @classmethod
    def make(cls, delta: float, ckl: float) -> "KernelCoeffs":
        if delta <= 0:
            raise ValueError("delta must be positive")
        u = -math.expm1(-2.0 * delta)        # 1 - exp(-2 delta)
        return cls(
            delta=delta,
            ckl=ckl,
            decay=math.exp(-2.0 * delta),
            half_relax=0.5 * u,
            grad_u=u / (2.0 * ckl),
            grad_x=_x_drift_gap(delta) / (2.0 * ckl),
            var_xx=_var_xx_scaled(delta) / ckl,
            var_uu=-math.expm1(-4.0 * delta) / ckl,
            cov_xu=u * u / (2.0 * ckl),
        )

    def chol(self) -> tuple[float, float, float, bool]:
        """Lower Cholesky (sx, b, su) of [[var_xx, cov],[cov, var_uu]].

        Returns clamped=True when cancellation pushed the conditional
        velocity variance below zero (it is clamped, never negative).
        """
        sx = math.sqrt(max(self.var_xx, 0.0))
        if sx == 0.0:
            return 0.0, 0.0, math.sqrt(max(self.var_uu, 0.0)), self.var_xx < 0
        b = self.cov_xu / sx
        resid = self.var_uu - b * b
        return sx, b, math.sqrt(max(resid, 0.0)), resid < 0 or self.var_xx < 0


@dataclass
class KernelMoments:
    """Conditional mean and per-coordinate covariance of the next state."""
    mean_x: np.ndarray
    mean_u: np.ndarray
    var_xx: float
    var_uu: float
    cov_xu: float
    ckl: float

    def to_dict(self):
        return {"mean_x": self.mean_x.tolist(), "mean_u": self.mean_u.tolist(),
                "var_xx": self.var_xx, "var_uu": self.var_uu, "cov_xu": self.cov_xu,
                "ckl": self.ckl}


def ud_kernel_moments(potential: PotentialModel, x, u, delta: float,
                      c_abs: float = C_ABS) -> KernelMoments:
    """Exact conditional Gaussian for one step from (x, u) with the gradient
    frozen at x."""
    ckl = c_abs * potential.kappa * potential.l_smooth
    co = KernelCoeffs.make(delta, ckl)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _, grad = potential.evaluate(x)
    mean_u = u * co.decay - co.grad_u * grad
    mean_x = x + co.half_relax * u - co.grad_x * grad
    return KernelMoments(mean_x, mean_u, co.var_xx, co.var_uu, co.cov_xu, ckl)


@dataclass
class PhaseState:
    x: np.ndarray
    u: np.ndarray
    step_index: int
    rng: np.random.Generator


def ud_update(x, u, grad, co: KernelCoeffs, xi1, xi2) -> tuple[np.ndarray, np.ndarray, bool]:
    """Vectorized exact-kernel step given pre-drawn standard normals."""
    sx, b, su, clamped = co.chol()
    mean_x = x + co.half_relax * u - co.grad_x * grad
    mean_u = u * co.decay - co.grad_u * grad
    return mean_x + sx * xi1, mean_u + b * xi1 + su * xi2, clamped


def ud_step(potential: PotentialModel, state: PhaseState, delta: float,
            c_abs: float = C_ABS, noise=None) -> PhaseState:
    """Advance one chain a single exact-kernel step; noise=(0,0) reduces to
    the kernel means."""
    co = KernelCoeffs.make(delta, c_abs * potential.kappa * potential.l_smooth)
    _, grad = potential.evaluate(state.x)
    if noise is None:
        xi1 = state.rng.standard_normal(state.x.shape)
        xi2 = state.rng.standard_normal(state.x.shape)
    else:
        xi1, xi2 = (np.asarray(z, dtype=float) for z in noise)
    x, u, _ = ud_update(state.x, state.u, grad, co, xi1, xi2)
    return PhaseState(x, u, state.step_index + 1, state.rng)


def ud_run(potential: PotentialModel, x0, delta: float, n: int, ensemble: int,
           seed: int, c_abs: float = C_ABS, checkpoints=None,
           return_velocities: bool = False):
    """Ensemble of independent chains from (x0, 0); same stream contract as
    the first-order runner. Returns (positions, info); info carries velocity
    snapshots when asked and the count of PSD clamps."""
    if delta <= 0 or n < 0 or ensemble < 1:
        raise ValueError("need delta > 0, n >= 0, ensemble >= 1")
    x0 = np.asarray(x0, dtype=float).reshape(potential.dim)
    if np.linalg.norm(x0) > potential.radius:
        warnings.warn("start lies outside the declared ball; the W1 guarantee "
                      "assumes ||x0|| <= R", stacklevel=2)
    d = potential.dim
    co = KernelCoeffs.make(delta, c_abs * potential.kappa * potential.l_smooth)
    checkpoints = sorted(set(int(c) for c in (checkpoints or [])))
    gens = streams.member_generators(seed, ensemble)
    x = np.tile(x0, (ensemble, 1))
    u = np.zeros_like(x)
    snaps: dict[int, np.ndarray] = {}
    if 0 in checkpoints:
        snaps[0] = x.copy()
    clamps = 0

    chunk = streams.chunk_steps(n, ensemble, 2 * d)
    step = 0
    while step < n:
        take = min(chunk, n - step)
        noise = streams.stacked_normals(gens, take, 2 * d)
        for j in range(take):
            _, grad = potential.value_and_grad(x)
            x, u, clamped = ud_update(x, u, grad, co,
                                      noise[j, :, :d], noise[j, :, d:])
            clamps += bool(clamped)
            step += 1
            if step in checkpoints:
                snaps[step] = x.copy()
    info = {"checkpoints": snaps, "psd_clamps": clamps}
    if return_velocities:
        info["velocities"] = u
    return x, info


@dataclass
class UnderdampedPlan:
    delta: float
    n: int
    n_raw: float
    epsilon: float
    feasible: bool
    log_delta: float
    log_n: float
    scale: float = 1.0
    note: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def plan_underdamped_constants(l_smooth: float, m_convex: float, radius: float,
                               d: int, epsilon: float, scale: float = 1.0) -> UnderdampedPlan:
    """Step size and iteration count for the second-order sampler."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    L, m, R = float(l_smooth), float(m_convex), float(radius)
    kappa = L / m
    lr2 = L * R * R
    spread = R * R + d / m
    ln_eps = math.log(epsilon)
    big = max(kappa, lr2)

    ln_delta = (-2.75 * lr2 + ln_eps - math.log(1e8) - math.log(big)
                - 0.5 * math.log(spread))

    log_term = math.log(30.0) + 2.75 * lr2 + 0.5 * math.log(spread) - ln_eps
    note = ""
    if log_term <= 0:
        log_term = 1.0
        note = "target accuracy so loose the log factor went nonpositive; clamped to 1"
    ln_n = (math.log(1e18) + 5.5 * lr2 + math.log(kappa) + 2.0 * math.log(big)
            + math.log(log_term) + 0.5 * math.log(spread) - ln_eps)

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
    return UnderdampedPlan(delta=delta, n=n, n_raw=n_raw, epsilon=float(epsilon),
                           feasible=feasible, log_delta=ln_delta, log_n=ln_n,
                           scale=float(scale), note=note)


def plan_underdamped(potential: PotentialModel, epsilon: float,
                     d: int | None = None, scale: float = 1.0) -> UnderdampedPlan:
    return plan_underdamped_constants(potential.l_smooth, potential.m_convex,
                                      potential.radius,
                                      potential.dim if d is None else d,
                                      epsilon, scale)
