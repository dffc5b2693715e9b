"""Reference samplers for the target distributions of the benchmarks.

These provide ground-truth sample sets for the Wasserstein acceptance
checks: the quadratic target is an exact Gaussian, everything else goes
through a generic rejection sampler whose envelope constant is bounded by a
grid scan (dimension 1 or 2 only, which covers the desk-scale experiments).
"""

from __future__ import annotations

import numpy as np

from .potentials import PotentialModel, Quadratic


def gaussian_reference(m_convex: float, dim: int, n: int, seed: int) -> np.ndarray:
    """n exact samples of the centered Gaussian with covariance I/m."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, dim)) / np.sqrt(m_convex)


def rejection_reference(potential: PotentialModel, n: int, seed: int,
                        proposal_std: float | None = None,
                        grid_points: int = 601) -> np.ndarray:
    """n samples of the density proportional to exp(-U) by rejection.

    Proposal is an isotropic Gaussian wide enough to dominate the target's
    second-moment envelope; the acceptance constant is the grid maximum of
    the log-ratio, padded by 10%. Only supports dim <= 2 (the ratio scan is a
    dense grid).
    """
    d = potential.dim
    if d > 2:
        raise ValueError("rejection_reference supports dim <= 2")
    if proposal_std is None:
        spread = 2.0 * d / potential.m_convex + 18.0 * potential.radius**2
        proposal_std = float(np.sqrt(spread / d) + 1.0)
    s2 = proposal_std**2

    half = potential.radius + 8.0 * proposal_std
    axis = np.linspace(-half, half, grid_points)
    if d == 1:
        grid = axis[:, None]
    else:
        gx, gy = np.meshgrid(axis, axis)
        grid = np.column_stack([gx.ravel(), gy.ravel()])
    u_grid, _ = potential.evaluate(grid)
    log_ratio = -u_grid + 0.5 * np.sum(grid * grid, axis=1) / s2
    log_m = float(np.max(log_ratio)) + np.log(1.1)

    rng = np.random.default_rng(seed)
    out = np.empty((n, d))
    filled = 0
    while filled < n:
        batch = max(4 * (n - filled), 1024)
        x = proposal_std * rng.standard_normal((batch, d))
        u_val, _ = potential.evaluate(x)
        log_acc = -u_val + 0.5 * np.sum(x * x, axis=1) / s2 - log_m
        accept = np.log(rng.random(batch)) < log_acc
        got = x[accept]
        take = min(got.shape[0], n - filled)
        out[filled:filled + take] = got[:take]
        filled += take
    return out


def target_reference(potential: PotentialModel, n: int, seed: int) -> np.ndarray:
    """Best available exact-or-rejection sampler for the potential's target."""
    if isinstance(potential, Quadratic):
        return gaussian_reference(potential.strength, potential.dim, n, seed)
    return rejection_reference(potential, n, seed)
