import math

import numpy as np
import pytest

from langmc.coupling import (CouplingConstants, JumpViolation, SwitchEvents,
                             check_jump_nonpositive, expected_fn_params,
                             lyapunov_eval, lyapunov_fn, od_coupled_run,
                             od_coupled_step, od_pair_init, stationary_pair_init,
                             ud_coupled_run, ud_coupled_step, ud_coupling_init,
                             ud_em_run, _events_from_trace)
from langmc.distance_fn import DistanceFn
from langmc.potentials import GaussianMixture, Quadratic
from langmc.reference import target_reference
from langmc.slopes import fit_exp_rate
from langmc.underdamped import velocity_variance


@pytest.fixture(scope="module")
def small_mixture():
    # tighter mode separation so both coupling phases get populated quickly
    return GaussianMixture(2, [[0.5, 0.0], [-0.5, 0.0]], sigma2=1.0)


def test_constants_formulas(quad2):
    c = CouplingConstants.for_potential(quad2, c_abs=1000.0)
    ck = 1000.0
    assert math.isclose(c.t_sync, 3 * ck**2 * math.log(10), rel_tol=1e-12)
    damp = math.exp(-2.75)
    assert math.isclose(c.c_sync, damp / (600 * ck**2 * math.log(10)), rel_tol=1e-12)
    assert math.isclose(c.c_ref, min(damp / 1375.0, damp / 4000.0), rel_tol=1e-12)
    # the synchronous discount accumulated over one stretch is c-invariant
    for c_abs in (2.0, 50.0, 1000.0):
        cc = CouplingConstants.for_potential(quad2, c_abs)
        assert math.isclose(cc.c_sync * cc.t_sync, damp / 200.0, rel_tol=1e-12)


def test_lyapunov_fn_parameters(quad2):
    alpha, r_f = expected_fn_params(quad2)
    assert alpha == 0.25 and math.isclose(r_f, math.sqrt(11.0))
    fn = lyapunov_fn(quad2)
    assert fn.alpha_f == alpha and fn.r_f == r_f


def test_lyapunov_eval_trivial_cases(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    fn = lyapunov_fn(quad2)
    zero = lyapunov_eval(np.zeros(2), np.zeros(2), 1.0, 0.7, 0.0, 5.0, 1.0,
                         fn, consts)
    assert zero == 0.0
    sync = lyapunov_eval(np.ones(2), np.zeros(2), 0.0, 0.7, 0.0, 3.0, 3.0,
                         fn, consts)
    assert math.isclose(sync, float(fn.f(0.7)), rel_tol=1e-12)


def test_lyapunov_eval_rejects_wrong_fn(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    with pytest.raises(ValueError):
        lyapunov_eval(np.zeros(2), np.zeros(2), 1.0, 0.0, 0.0, 0.0, 0.0,
                      DistanceFn(0.5, 1.0), consts)


# -- first-order coupling ------------------------------------------------------


def test_od_equal_pairs_stay_merged(quad2):
    fn = DistanceFn(0.25, 1.0)
    start = np.tile(np.array([0.4, -0.1]), (32, 1))
    res = od_coupled_run(quad2, start, start.copy(), 0.01, 50, seed=2, fn=fn)
    assert np.all(res.merged_frac == 1.0)
    assert np.all(res.mean_f == 0.0)


def test_od_merged_pairs_never_separate(quad2):
    fn = DistanceFn(0.25, 1.0)
    ref = target_reference(quad2, 512, 3)
    x, y, _ = od_pair_init(np.array([1.0, 0.0]), ref)
    res = od_coupled_run(quad2, x, y, 0.01, 600, seed=4, fn=fn, record_every=10)
    assert np.all(np.diff(res.merged_frac) >= 0.0)
    assert res.merged_frac[-1] > 0.9


def test_od_coupled_step_merged_pairs_move_together(quad2):
    x = np.array([[0.5, 0.0]])
    y = x.copy()
    x2, y2, m2 = od_coupled_step(quad2, x, y, np.array([True]), 0.01,
                                 noise=np.array([[0.3, -0.2]]),
                                 bridge_u=np.array([1.0]))
    assert np.array_equal(x2, y2)
    assert m2[0]


def test_od_coupled_step_1d_negated_increment():
    pot = Quadratic(1, strength=1e-12, radius=1.0)
    h = 1e-4
    x2, y2, m2 = od_coupled_step(pot, np.array([[2.0]]), np.array([[0.0]]),
                                 np.array([False]), h,
                                 noise=np.array([[0.25]]),
                                 bridge_u=np.array([1.0]))
    amp = math.sqrt(2.0 * h) * 0.25
    assert math.isclose(x2[0, 0], 2.0 + amp, rel_tol=1e-12)
    assert math.isclose(y2[0, 0], -amp, abs_tol=1e-12)
    assert not m2[0]


def test_od_coupled_step_bridge_crossing_merges():
    pot = Quadratic(1, strength=1e-12, radius=1.0)
    # endpoints close relative to the substep noise: crossing probability
    # exp(-r_old r_new / (4h)) is ~1, so a tiny uniform draw must coalesce
    x2, y2, m2 = od_coupled_step(pot, np.array([[0.01]]), np.array([[0.0]]),
                                 np.array([False]), 0.01,
                                 noise=np.array([[0.0]]),
                                 bridge_u=np.array([1e-6]))
    assert m2[0]
    assert np.array_equal(x2, y2)


def test_od_1d_reflection_negates_the_increment():
    # in one dimension the partner receives the negated increment, so the
    # separation moves by twice the driving noise: after one substep with a
    # negligible drift, r_new = |r_old + 2 sqrt(2 h) xi| exactly
    pot = Quadratic(1, strength=1e-9, radius=1.0)
    n, h = 20_000, 1e-4
    x = np.zeros((n, 1)) + 10.0
    y = x - 5.0
    res = od_coupled_run(pot, x, y, h, 1, seed=11, fn=None)
    from langmc import streams
    gens = streams.member_generators(11, n)
    noise = streams.stacked_normals(gens, 1, 2)[0]   # width d + 1 with d = 1
    xi = noise[:, 0]
    r_new = np.abs(5.0 + 2.0 * math.sqrt(2.0 * h) * xi)
    assert math.isclose(res.mean_r[-1], r_new.mean(), rel_tol=1e-9)
    assert math.isclose(np.var(r_new - 5.0), 8 * h, rel_tol=0.05)


def test_od_quadratic_contraction_rate(quad2):
    fn = DistanceFn(quad2.l_smooth / 4.0, quad2.radius)
    ref = target_reference(quad2, 2000, 13)
    x, y, _ = od_pair_init(np.array([1.0, 0.0]), ref)
    res = od_coupled_run(quad2, x, y, 0.01, 400, seed=14, fn=fn, record_every=10)
    rate, _ = fit_exp_rate(res.times, res.mean_f)
    bound = math.exp(-0.25) * min(4.0, 0.5)
    assert rate <= -0.25 * bound


def test_od_pair_init_monotone_in_1d(rng):
    ref = np.sort(rng.standard_normal((16, 1)), axis=0)[::-1]
    starts = rng.standard_normal((16, 1))
    x, y, meta = od_pair_init(starts, ref)
    assert meta["initial_coupling"] == "monotone"
    assert np.all(np.diff(x[:, 0]) >= 0)
    assert np.all(np.diff(y[:, 0]) >= 0)


# -- second-order switched coupling --------------------------------------------


def run_small_coupling(pot, c_abs=2.0, ensemble=300, delta=0.05, spd=10,
                       stretch=1.25, seed=21):
    consts = CouplingConstants.for_potential(pot, c_abs)
    fn = lyapunov_fn(pot)
    ref = target_reference(pot, ensemble, seed)
    y, v = stationary_pair_init(pot, ref, seed, c_abs)
    x0 = pot.radius * np.eye(pot.dim)[0]
    state = ud_coupling_init(x0, y, v, consts)
    n_deltas = int(stretch * consts.t_sync / delta)
    res = ud_coupled_run(pot, state, consts, fn, delta, spd, n_deltas,
                         seed=seed + 1, record_every=50)
    return consts, fn, res


def test_ud_machine_invariants(small_mixture):
    consts, fn, res = run_small_coupling(small_mixture)
    assert res.events.member.size > 50
    assert not check_jump_nonpositive(res.events, fn, consts)
    assert res.max_reflect_dist <= math.sqrt(5.0) * small_mixture.radius + 1e-9
    assert res.min_xi >= -1e-15
    assert res.min_sandwich_gap >= -1e-9
    # switches happen one stretch after their trigger
    assert np.all(res.events.elapsed >= consts.t_sync - 1e-9)
    assert np.all(res.events.elapsed <= consts.t_sync + res.substep + 1e-9)


def test_ud_refresh_every_substep_kills_xi(small_mixture):
    consts = CouplingConstants.for_potential(small_mixture, 2.0)
    fn = lyapunov_fn(small_mixture)
    ref = target_reference(small_mixture, 64, 5)
    y, v = stationary_pair_init(small_mixture, ref, 5, 2.0)
    state = ud_coupling_init(np.array([2.0, 0.0]), y, v, consts)
    res = ud_coupled_run(small_mixture, state, consts, fn, delta=0.01,
                         substeps_per_delta=1, n_deltas=400, seed=6)
    assert np.all(res.mean_xi == 0.0)


def test_ud_identical_pairs_stay_identical(quad2):
    # coincident pairs share the noise and, when the freeze anchor tracks the
    # chain (refresh every substep), also the drift: identical forever. With
    # a stale anchor the freeze gap reopens the separation, which is the
    # discretization error the xi budget accounts for.
    consts = CouplingConstants.for_potential(quad2, 2.0)
    fn = lyapunov_fn(quad2)
    y = target_reference(quad2, 64, 9)
    v = np.zeros_like(y)
    state = ud_coupling_init(y.copy(), y, v, consts)   # x0 = y rowwise, u = v = 0
    res = ud_coupled_run(quad2, state, consts, fn, delta=0.005,
                         substeps_per_delta=1, n_deltas=800, seed=10)
    assert res.mean_dist[-1] == 0.0
    assert res.mean_lyap[-1] == 0.0
    stale = ud_coupling_init(y.copy(), y, v, consts)
    res2 = ud_coupled_run(quad2, stale, consts, fn, delta=0.02,
                          substeps_per_delta=4, n_deltas=200, seed=10)
    assert res2.mean_dist[-1] > 0.0          # freeze gap genuinely separates


def test_ud_coupled_step_contract_and_refresh(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    y = target_reference(quad2, 4, 2)
    v = np.zeros_like(y)
    st = ud_coupling_init(np.zeros(2), y, v, consts)
    with pytest.raises(ValueError):
        ud_coupled_step(quad2, st, consts, delta=0.02, substep=0.007)
    rng = np.random.default_rng(0)
    st1 = ud_coupled_step(quad2, st, consts, 0.02, 0.01, rng=rng)
    assert st1.t == pytest.approx(0.01)
    assert np.array_equal(st1.anchor, st.anchor)    # mid-window: frozen anchor
    st2 = ud_coupled_step(quad2, st1, consts, 0.02, 0.01, rng=rng)
    assert np.array_equal(st2.anchor, st2.x)        # window boundary: refresh
    assert np.all(st2.xi >= 0.0)
    assert st.xi is not st2.xi                      # input state untouched
    assert np.all(st.xi == 0.0)


def test_ud_run_rejects_wrong_fn(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    y = target_reference(quad2, 8, 1)
    v = np.zeros_like(y)
    state = ud_coupling_init(np.zeros(2), y, v, consts)
    with pytest.raises(ValueError):
        ud_coupled_run(quad2, state, consts, DistanceFn(1.0, 1.0), 0.01, 2, 5, 1)


def test_ud_init_phase_split(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    y = np.array([[0.1, 0.0], [50.0, 0.0]])
    v = np.zeros_like(y)
    state = ud_coupling_init(np.zeros(2), y, v, consts)
    assert state.mu[0] and not state.mu[1]          # near -> reflection
    assert state.tau[0] == -consts.t_sync and state.tau[1] == 0.0
    assert np.all(state.xi == 0.0)


def test_jump_check_trivial_and_forced(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    fn = lyapunov_fn(quad2)
    assert check_jump_nonpositive(SwitchEvents.empty(), fn, consts) == []
    # hand-built violation: huge separation at the switch but tiny rho
    one = np.ones(1)
    bad = SwitchEvents(member=np.array([0]), t=one * 10, z_norm=one * 3.0,
                       zw_norm=one * 3.0, rho=one * 0.01, xi=one * 0.0,
                       elapsed=one * consts.t_sync)
    violations = check_jump_nonpositive(bad, fn, consts)
    assert len(violations) == 1
    assert isinstance(violations[0], JumpViolation)
    assert violations[0].lhs > violations[0].rhs


def test_jump_check_accepts_dense_trace(quad2):
    consts = CouplingConstants.for_potential(quad2, 2.0)
    fn = lyapunov_fn(quad2)
    trace = [
        {"t": 0.0, "mu": [False], "z_norm": [2.0], "zw_norm": [2.0],
         "rho": [5.0], "xi": [0.0], "tau": [0.0]},
        {"t": consts.t_sync + 0.01, "mu": [True], "z_norm": [0.5],
         "zw_norm": [0.5], "rho": [5.0], "xi": [0.1],
         "tau": [0.0]},
    ]
    events = _events_from_trace(trace)
    assert events.member.size == 1
    assert check_jump_nonpositive(trace, fn, consts) == []


def test_em_marginal_preserves_stationary_moments(quad2):
    ref = target_reference(quad2, 4000, 3)
    rng = np.random.default_rng(4)
    v0 = math.sqrt(velocity_variance(quad2)) * rng.standard_normal(ref.shape)
    h = 0.01
    y, v = ud_em_run(quad2, ref, v0, substep=h, n_substeps=2000, seed=9)
    n = y.size
    assert abs(y.var(ddof=1) - 1.0) <= 3.0 * math.sqrt(2.0 / n) + 3.0 * h
    vel_target = velocity_variance(quad2)
    assert abs(v.var(ddof=1) - vel_target) <= vel_target * (3.0 * math.sqrt(2.0 / n) + 3.0 * h)
