import math

import numpy as np
import pytest

from langmc.discretization import (od_discretization_sweep, od_one_step_errors,
                                   ud_discretization_sweep,
                                   ud_velocity_moment_check)
from langmc.potentials import Quadratic
from langmc.slopes import fit_loglog_slope, fit_exp_rate, moving_average


def test_fit_loglog_slope_recovers_power():
    x = np.geomspace(0.01, 1, 7)
    slope, intercept = fit_loglog_slope(x, 3.0 * x**2.5)
    assert math.isclose(slope, 2.5, rel_tol=1e-12)
    assert math.isclose(intercept, math.log(3.0), rel_tol=1e-10)


def test_fit_helpers_validate():
    with pytest.raises(ValueError):
        fit_loglog_slope([1.0], [1.0])
    with pytest.raises(ValueError):
        fit_loglog_slope([1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        fit_exp_rate([0.0, 1.0], [0.0, 0.0])


def test_moving_average_windows():
    out = moving_average(np.array([1.0, 2.0, 3.0, 4.0]), window=2)
    assert np.allclose(out, [1.0, 1.5, 2.5, 3.5])


def test_od_sweep_cubic_scaling(quad2):
    cap = quad2.m_convex / (512.0 * quad2.l_smooth**2)
    deltas = (cap * 2.0 ** -np.arange(0, 8)).tolist()
    rep = od_discretization_sweep(quad2, np.zeros(2), deltas, ensemble=2048, seed=17)
    assert 2.7 <= rep.slope <= 3.3
    assert rep.warnings == []
    assert rep.errors == sorted(rep.errors, reverse=True)


def test_od_sweep_deterministic(quad2):
    deltas = [1e-3, 5e-4, 2.5e-4]
    a = od_discretization_sweep(quad2, np.zeros(2), deltas, 256, seed=3)
    b = od_discretization_sweep(quad2, np.zeros(2), deltas, 256, seed=3)
    assert a.errors == b.errors
    assert a.slope == b.slope


def test_od_sweep_single_point_marks_insufficient(quad2):
    rep = od_discretization_sweep(quad2, np.zeros(2), [1e-4], 64, seed=1)
    assert rep.slope is None
    assert any("insufficient" in w for w in rep.warnings)


def test_od_sweep_warns_above_cap(quad2):
    rep = od_discretization_sweep(quad2, np.zeros(2), [0.5, 0.25], 64, seed=1)
    assert any("precondition" in w for w in rep.warnings)


def test_od_drift_only_error_matches_linear_flow():
    # with the noise turned off, the one-step gap on a quadratic is exactly
    # (e^{-delta m} - (1 - delta m))^2 ||x0||^2 with a delta^4 law
    pot = Quadratic(2, strength=1.0, radius=2.0)
    x0 = np.array([1.0, 0.0])
    deltas = [1e-3, 5e-4, 2.5e-4]
    errs = od_one_step_errors(pot, x0, deltas, ensemble=4, seed=1, noise_scale=0.0)
    exact = np.array([(math.exp(-d) - (1 - d)) ** 2 for d in deltas])
    assert np.allclose(errs, exact, rtol=0.02)
    slope, _ = fit_loglog_slope(deltas, errs)
    assert 3.9 <= slope <= 4.1


def test_od_reference_integrator_is_converged(quad2):
    cap = quad2.m_convex / (512.0 * quad2.l_smooth**2)
    coarse = od_one_step_errors(quad2, np.zeros(2), [cap / 64], 4096, seed=5,
                                ref_refine=256)[0]
    fine = od_one_step_errors(quad2, np.zeros(2), [cap / 64], 4096, seed=5,
                              ref_refine=512)[0]
    assert abs(coarse - fine) / fine < 0.10


def test_ud_moment_check_passes_with_tiny_ratio(quad2):
    cap = 1.0 / (12000.0 * quad2.kappa)
    rep = ud_velocity_moment_check(quad2, cap, horizon=0.2, ensemble=256, seed=3)
    assert rep.passed
    assert rep.ratio < 1e-6
    assert rep.observed_max <= rep.bound


def test_ud_moment_check_warns_above_cap(quad2):
    with pytest.warns(UserWarning):
        rep = ud_velocity_moment_check(quad2, 0.01, horizon=0.05, ensemble=32, seed=3)
    assert rep.extras.get("precondition_violated")


def test_ud_sweep_quadratic_scaling(quad2):
    cap = 1.0 / (12000.0 * quad2.kappa)
    deltas = (cap * 2.0 ** -np.arange(0, 5)).tolist()
    rep = ud_discretization_sweep(quad2, deltas, horizon=0.1, ensemble=256, seed=5)
    assert 1.7 <= rep.slope <= 2.3
    assert rep.extras["all_below_bound"]


def test_ud_sweep_deterministic(quad2):
    cap = 1.0 / (12000.0 * quad2.kappa)
    deltas = [cap, cap / 2]
    a = ud_discretization_sweep(quad2, deltas, 0.05, 64, seed=9)
    b = ud_discretization_sweep(quad2, deltas, 0.05, 64, seed=9)
    assert a.errors == b.errors
