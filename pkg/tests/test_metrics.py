import itertools
import math

import numpy as np
import pytest

from langmc.distance_fn import DistanceFn
from langmc.metrics import (second_moment_check, w1_exact_1d, w1_sliced,
                            wf_empirical, wf_sandwich_bounds)
from langmc.potentials import Quadratic


def w1_bruteforce(a, b):
    """Minimum over all pairings of the mean absolute gap."""
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        cost = sum(abs(a[i] - b[j]) for i, j in enumerate(perm)) / len(a)
        best = min(best, cost)
    return best


def wf_bruteforce(a, b, fn):
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        cost = sum(float(fn.f(abs(a[i] - b[j]))) for i, j in enumerate(perm)) / len(a)
        best = min(best, cost)
    return best


def test_w1_identical_and_point_masses():
    assert w1_exact_1d([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).value == 0.0
    assert w1_exact_1d([0.0], [1.0]).value == 1.0


def test_w1_requires_equal_counts():
    with pytest.raises(ValueError):
        w1_exact_1d([1.0, 2.0], [1.0])


def test_w1_matches_bruteforce(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        a = rng.standard_normal(n)
        b = rng.standard_normal(n)
        assert math.isclose(w1_exact_1d(a, b).value, w1_bruteforce(a, b),
                            rel_tol=1e-12, abs_tol=1e-12)


def test_w1_triangle_inequality(rng):
    for _ in range(50):
        a, b, c = rng.standard_normal((3, 12))
        ab = w1_exact_1d(a, b).value
        bc = w1_exact_1d(b, c).value
        ac = w1_exact_1d(a, c).value
        assert ac <= ab + bc + 1e-12


def test_sliced_identical_sets():
    x = np.random.default_rng(0).standard_normal((64, 3))
    assert w1_sliced(x, x.copy(), 16, seed=1, n_boot=0).value == 0.0


def test_sliced_reduces_to_exact_in_1d(rng):
    a = rng.standard_normal((40, 1))
    b = rng.standard_normal((40, 1))
    sliced = w1_sliced(a, b, 1, seed=3, n_boot=0).value
    assert math.isclose(sliced, w1_exact_1d(a, b).value, rel_tol=1e-12)


def test_sliced_translation_invariance(rng):
    a = rng.standard_normal((128, 2))
    b = rng.standard_normal((128, 2))
    shift = np.array([3.7, -1.2])
    d0 = w1_sliced(a, b, 32, seed=5, n_boot=0).value
    d1 = w1_sliced(a + shift, b + shift, 32, seed=5, n_boot=0).value
    assert abs(d0 - d1) <= 1e-12


def test_sliced_mean_shift_scaling():
    rng = np.random.default_rng(7)
    n, projections = 20_000, 256
    base = rng.standard_normal((n, 2))
    other = rng.standard_normal((n, 2))
    dirs_rng = np.random.default_rng(11)
    dirs = dirs_rng.standard_normal((2, projections))
    dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
    for scale in (0.5, 1.0):
        mu = np.array([scale, 0.0])
        est = w1_sliced(base, other + mu, projections, seed=11, n_boot=0).value
        # projection-wise shifted-Gaussian gap |<theta, mu>| plus the
        # finite-sample floor measured at zero shift
        oracle = float(np.mean(np.abs(dirs.T @ mu)))
        floor = w1_sliced(base, other, projections, seed=11, n_boot=0).value
        assert abs(est - oracle) <= floor + 0.01


def test_sliced_bootstrap_se(rng):
    a = rng.standard_normal((200, 2))
    b = rng.standard_normal((200, 2)) + np.array([0.5, 0.0])
    est = w1_sliced(a, b, 16, seed=2, n_boot=50)
    assert est.std_error is not None and est.std_error > 0
    assert est.method == "sliced"


def test_sliced_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        w1_sliced(rng.standard_normal((8, 2)), rng.standard_normal((8, 3)), 4)


def test_wf_identical_sets():
    fn = DistanceFn(0.25, 1.0)
    assert wf_empirical([1.0, 2.0], [1.0, 2.0], fn).value == 0.0


def test_wf_exact_matches_permutation_bruteforce(rng):
    fn = DistanceFn(0.25, 1.0)
    for _ in range(10):
        a = rng.standard_normal(6) * 2
        b = rng.standard_normal(6) * 2
        exact = wf_empirical(a, b, fn)
        assert exact.method == "exact-1d"
        assert math.isclose(exact.value, wf_bruteforce(a, b, fn),
                            rel_tol=1e-12, abs_tol=1e-12)
        # the sorted coupling can only be worse for a concave cost
        monotone = float(np.mean(fn.f(np.abs(np.sort(a) - np.sort(b)))))
        assert exact.value <= monotone + 1e-12


def test_wf_large_n_is_tagged_upper_bound(rng):
    fn = DistanceFn(0.25, 1.0)
    a = rng.standard_normal(64)
    b = rng.standard_normal(64)
    est = wf_empirical(a, b, fn)
    assert est.method == "monotone-upper-bound"


def test_wf_sandwich_every_call(rng):
    fn = DistanceFn(0.25, 1.0)
    for n in (6, 40):
        for _ in range(10):
            a = rng.standard_normal(n) * 1.5
            b = rng.standard_normal(n) * 1.5
            wf = wf_empirical(a, b, fn).value
            w1 = w1_exact_1d(a, b).value
            lo, hi = wf_sandwich_bounds(w1, fn)
            assert lo - 1e-12 <= wf <= hi + 1e-12


def test_wf_rejects_higher_dimension(rng):
    fn = DistanceFn(0.25, 1.0)
    with pytest.raises(ValueError, match="sandwich"):
        wf_empirical(rng.standard_normal((8, 2)), rng.standard_normal((8, 2)), fn)


def test_second_moment_gaussian_passes(rng):
    pot = Quadratic(2, strength=1.0, radius=1.0)
    samples = rng.standard_normal((20_000, 2))
    check = second_moment_check(samples, pot)
    assert check.passed
    assert check.observed < check.bound


def test_second_moment_adversarial_fails(rng):
    pot = Quadratic(2, strength=1.0, radius=1.0)
    bound = 2 * 2 / 1.0 + 18.0
    radius = 10.0 * math.sqrt(bound)
    x = rng.standard_normal((500, 2))
    x = radius * x / np.linalg.norm(x, axis=1, keepdims=True)
    check = second_moment_check(x, pot)
    assert not check.passed
