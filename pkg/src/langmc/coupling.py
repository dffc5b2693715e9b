"""Coupled-process simulators for the contraction experiments.

Two constructions are provided:

* First-order reflection coupling: two copies of the gradient-flow-plus-noise
  diffusion share one Brownian path, with the second copy receiving the
  increment reflected across the separation direction. The warped separation
  f(||x - y||) then contracts in expectation even on nonconvex stretches, and
  pairs that touch are merged for good.

* Second-order switched coupling: the discretized (frozen-gradient) kinetic
  chain is coupled to a stationary copy of the exact kinetic diffusion. The
  coupling runs synchronously while the pair is far apart (drift alone
  contracts there), and by reflection once they are inside the sqrt(5) R ball,
  with bookkeeping (tau, rho, mu, xi) that makes the switched Lyapunov value
  provably nonincreasing at switch times. All couplings are integrated with
  shared-noise Euler-Maruyama substeps; the continuous-time joint process has
  no exact sampler.

The Lyapunov value of a switched state is

    mu * f((1 + 2/(c kappa)) ||z|| + ||z + w||)
    + (1 - mu) * (f(rho) * exp(-c_sync (t - tau)) + xi),

with z, w the position and velocity differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .distance_fn import DistanceFn
from .potentials import PotentialModel
from .underdamped import C_ABS, velocity_variance
from . import streams


@dataclass(frozen=True)
class CouplingConstants:
    """Switching schedule and contraction rates for the kinetic coupling."""
    t_sync: float     # minimum synchronous stretch: 3 (c kappa)^2 log 10
    c_sync: float     # synchronous-phase discount rate
    c_ref: float      # reflection-phase contraction rate
    c_abs: float
    kappa: float
    l_smooth: float
    radius: float

    @classmethod
    def for_potential(cls, potential: PotentialModel,
                      c_abs: float = C_ABS) -> "CouplingConstants":
        kappa = potential.kappa
        L, R = potential.l_smooth, potential.radius
        ck = c_abs * kappa
        t_sync = 3.0 * ck * ck * math.log(10.0)
        damp = math.exp(-2.75 * L * R * R) if 2.75 * L * R * R < 700 else 0.0
        c_sync = damp / (600.0 * ck * ck * math.log(10.0))
        ref_ball = damp / (1375.0 * kappa * L * R * R) if R > 0 else math.inf
        c_ref = min(ref_ball, damp / (4.0 * ck))
        return cls(t_sync=t_sync, c_sync=c_sync, c_ref=c_ref, c_abs=c_abs,
                   kappa=kappa, l_smooth=L, radius=R)

    @property
    def ckl(self) -> float:
        return self.c_abs * self.kappa * self.l_smooth

    @property
    def weight(self) -> float:
        """Coefficient on ||z|| in the reflection-phase distance."""
        return 1.0 + 2.0 / (self.c_abs * self.kappa)


def expected_fn_params(potential: PotentialModel) -> tuple[float, float]:
    """(alpha_f, r_f) the Lyapunov construction requires: (L/4, sqrt(11) R)."""
    return potential.l_smooth / 4.0, math.sqrt(11.0) * potential.radius


def lyapunov_fn(potential: PotentialModel, tol: float = 1e-10) -> DistanceFn:
    a, rf = expected_fn_params(potential)
    return DistanceFn(a, rf, tol=tol)


def _require_matching_fn(fn: DistanceFn, consts: CouplingConstants):
    a = consts.l_smooth / 4.0
    rf = math.sqrt(11.0) * consts.radius
    if not (math.isclose(fn.alpha_f, a, rel_tol=1e-9)
            and math.isclose(fn.r_f, rf, rel_tol=1e-9)):
        raise ValueError(
            f"distance warp built with ({fn.alpha_f}, {fn.r_f});"
            f" the Lyapunov construction needs ({a}, {rf})")


def lyapunov_eval(z, w, mu, rho, xi, t, tau, fn: DistanceFn,
                  consts: CouplingConstants):
    """Switched Lyapunov value; accepts batches (rows of z, w)."""
    _require_matching_fn(fn, consts)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    mu = np.asarray(mu, dtype=float)
    arg = consts.weight * np.linalg.norm(z, axis=1) + np.linalg.norm(z + w, axis=1)
    sync = fn.f(np.asarray(rho, dtype=float)) * np.exp(-consts.c_sync * (np.asarray(t) - np.asarray(tau))) \
        + np.asarray(xi, dtype=float)
    vals = mu * fn.f(arg) + (1.0 - mu) * sync
    return vals if vals.size > 1 else float(vals[0])


# -- first-order reflection coupling ------------------------------------------

@dataclass
class OdCouplingResult:
    times: np.ndarray
    mean_f: np.ndarray         # ensemble mean of f(||x - y||)
    mean_r: np.ndarray
    merged_frac: np.ndarray
    substep: float
    metadata: dict = field(default_factory=dict)


def od_pair_init(x0, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Initial coupled pairs: chain starts at x0 (a point or an (n, d) set),
    partner drawn from the target reference. One dimension uses the sorted
    (monotone) pairing; otherwise pairing is independent, which only loosens
    constants."""
    y = np.array(reference, dtype=float)
    n, d = y.shape
    x0 = np.asarray(x0, dtype=float)
    x = np.tile(x0, (n, 1)) if x0.ndim == 1 else np.array(x0, dtype=float)
    if x.shape != y.shape:
        raise ValueError("start set and reference set must match in shape")
    meta = {"initial_coupling": "independent"}
    if d == 1:
        order_x = np.argsort(x[:, 0])
        order_y = np.argsort(y[:, 0])
        x, y = x[order_x], y[order_y]
        meta["initial_coupling"] = "monotone"
    return x, y, meta


def default_merge_tol(potential: PotentialModel) -> float:
    return 1e-9 * potential.radius if potential.radius > 0 else 1e-12


def od_coupled_step(potential: PotentialModel, x, y, merged, substep: float,
                    noise=None, bridge_u=None, rng=None, merge_tol=None):
    """One shared-noise reflection substep for a batch of coupled pairs.

    The partner receives the increment reflected across the separation
    direction until the pair coalesces; merged pairs move as one forever.
    Coalescence uses an absolute threshold plus the Brownian-bridge
    zero-crossing draw: the radial separation is a 1-d diffusion with noise
    variance 8 per unit time, and a fixed Euler step almost never lands
    within a small threshold of zero, but the bridge between the observed
    endpoints crosses it with probability exp(-r_old * r_new / (4 h)).
    Returns updated (x, y, merged).
    """
    if substep <= 0:
        raise ValueError("substep must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    merged = np.asarray(merged, dtype=bool).copy()
    n, d = x.shape
    if merge_tol is None:
        merge_tol = default_merge_tol(potential)
    if noise is None:
        noise = (rng or np.random.default_rng()).standard_normal((n, d))
    if bridge_u is None:
        bridge_u = (rng.random(n) if rng is not None
                    else np.random.default_rng().random(n))
    root2h = math.sqrt(2.0 * substep)

    gx = potential.gradient(x)
    gy = potential.gradient(y)
    diff = x - y
    r_old = np.linalg.norm(diff, axis=1)
    active = ~merged & (r_old > merge_tol)
    gamma = np.zeros_like(diff)
    gamma[active] = diff[active] / r_old[active, None]
    proj = np.sum(gamma * noise, axis=1, keepdims=True)
    noise_y = noise - 2.0 * gamma * proj
    x = x - substep * gx + root2h * noise
    y = np.where(merged[:, None], x, y - substep * gy + root2h * noise_y)
    r_new = np.linalg.norm(x - y, axis=1)
    crossed = bridge_u < np.exp(-r_old * r_new / (4.0 * substep))
    merged |= (r_new <= merge_tol) | crossed
    y[merged] = x[merged]
    return x, y, merged


def od_coupled_run(potential: PotentialModel, x, y, substep: float,
                   n_substeps: int, seed: int, fn: DistanceFn | None = None,
                   record_every: int = 1) -> OdCouplingResult:
    """Reflection-coupled pair ensemble: od_coupled_step driven by per-member
    noise streams, recording the warped separation and merge fraction."""
    if substep <= 0:
        raise ValueError("substep must be positive")
    from scipy.special import ndtr

    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    n, d = x.shape
    merge_tol = default_merge_tol(potential)
    gens = streams.member_generators(seed, n)

    times, mean_f, mean_r, merged_frac = [], [], [], []
    merged = np.linalg.norm(x - y, axis=1) <= merge_tol
    y[merged] = x[merged]

    def record(k):
        r = np.linalg.norm(x - y, axis=1)
        times.append(k * substep)
        mean_r.append(float(r.mean()))
        mean_f.append(float(np.mean(fn.f(r))) if fn is not None else float("nan"))
        merged_frac.append(float(merged.mean()))

    record(0)
    chunk = streams.chunk_steps(n_substeps, n, d + 1)
    k = 0
    while k < n_substeps:
        take = min(chunk, n_substeps - k)
        noise = streams.stacked_normals(gens, take, d + 1)
        for j in range(take):
            x, y, merged = od_coupled_step(
                potential, x, y, merged, substep,
                noise=noise[j, :, :d], bridge_u=ndtr(noise[j, :, d]),
                merge_tol=merge_tol)
            k += 1
            if k % record_every == 0 or k == n_substeps:
                record(k)
    return OdCouplingResult(np.array(times), np.array(mean_f), np.array(mean_r),
                            np.array(merged_frac), substep,
                            {"ensemble": n, "seed": seed})


# -- second-order switched coupling -------------------------------------------

@dataclass
class SwitchEvents:
    """States captured exactly at synchronous-to-reflection switches."""
    member: np.ndarray
    t: np.ndarray
    z_norm: np.ndarray
    zw_norm: np.ndarray
    rho: np.ndarray
    xi: np.ndarray
    elapsed: np.ndarray   # t - tau at the switch (the synchronous stretch)

    @classmethod
    def empty(cls):
        e = np.empty(0)
        return cls(e.astype(int), e, e, e, e, e, e)


@dataclass
class UdCouplingResult:
    times: np.ndarray
    mean_lyap: np.ndarray
    se_lyap: np.ndarray
    mean_dist: np.ndarray       # sqrt(||z||^2 + ||z + w||^2), ensemble mean
    frac_reflect: np.ndarray    # fraction of pairs in the reflection phase
    mean_xi: np.ndarray
    events: SwitchEvents
    max_reflect_dist: float     # max dist over visited reflection-phase states
    min_xi: float
    min_sandwich_gap: float     # min of L - e^{-11LR^2/4}/5 (||z|| + ||w||)
    delta: float
    substep: float
    consts: CouplingConstants
    tracked: dict = field(default_factory=dict)   # one member's full state series
    metadata: dict = field(default_factory=dict)


@dataclass
class UdCouplingState:
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    rho: np.ndarray
    mu: np.ndarray       # boolean: True = reflection phase
    xi: np.ndarray
    anchor: np.ndarray   # gradient-freeze point of the discrete chain
    t: float


def _pair_dist(z, zw):
    return np.sqrt(np.linalg.norm(z, axis=1) ** 2 + np.linalg.norm(zw, axis=1) ** 2)


def ud_coupling_init(x0, y, v, consts: CouplingConstants) -> UdCouplingState:
    """Initial switched state: pairs already inside the sqrt(5) R ball start
    in the reflection phase with a full synchronous stretch behind them;
    far pairs start synchronous at tau = 0."""
    y = np.array(y, dtype=float)
    v = np.array(v, dtype=float)
    n, d = y.shape
    x0 = np.asarray(x0, dtype=float)
    x = np.tile(x0, (n, 1)) if x0.ndim == 1 else np.array(x0, dtype=float)
    u = np.zeros_like(x)
    z = x - y
    w = u - v
    dist = _pair_dist(z, z + w)
    near = dist < math.sqrt(5.0) * consts.radius
    tau = np.where(near, -consts.t_sync, 0.0)
    rho = consts.weight * np.linalg.norm(z, axis=1) + np.linalg.norm(z + w, axis=1)
    return UdCouplingState(x=x, u=u, y=y, v=v, tau=tau, rho=rho,
                           mu=near.copy(), xi=np.zeros(n), anchor=x.copy(), t=0.0)


def _ud_substep(potential, consts, h, decay, phi_tol, noise_amp, xi_b, refresh,
                x, u, y, v, tau, rho, mu, xi, anchor, g_anchor, d_prev, t_new):
    """One Euler-Maruyama substep of the switched coupling: shared (possibly
    reflected) noise, gradient-freeze drift for the chain side, trapezoidal
    xi update, trigger/switch bookkeeping. Mutates tau/rho/xi in place and
    returns the moved arrays plus (mu_new, dist, z, zw, switched_mask)."""
    ckl = consts.ckl
    ball = math.sqrt(5.0) * consts.radius
    gy = potential.gradient(y)
    # reflect the shared increment for reflection-phase pairs
    phi = (x - y) + (u - v)
    phi_norm = np.linalg.norm(phi, axis=1)
    refl = mu & (phi_norm > phi_tol)
    gamma = np.zeros_like(phi)
    gamma[refl] = phi[refl] / phi_norm[refl, None]
    xi_y = xi_b - 2.0 * gamma * np.sum(gamma * xi_b, axis=1, keepdims=True)

    x_new = x + h * u
    u = u + h * (-2.0 * u - g_anchor / ckl) + noise_amp * xi_b
    y_new = y + h * v
    v = v + h * (-2.0 * v - gy / ckl) + noise_amp * xi_y
    x, y = x_new, y_new

    if refresh:
        anchor = x.copy()
        g_anchor = potential.gradient(anchor)
    d_new = np.linalg.norm(potential.gradient(x) - g_anchor, axis=1)
    xi[:] = decay * xi + (4.0 / ckl) * 0.5 * h * (decay * d_prev + d_new)

    z = x - y
    zw = z + (u - v)
    dist = _pair_dist(z, zw)
    due = t_new >= tau + consts.t_sync - 1e-9 * consts.t_sync
    trigger = due & (dist >= ball)
    if trigger.any():
        tau[trigger] = t_new
        rho[trigger] = (consts.weight * np.linalg.norm(z[trigger], axis=1)
                        + np.linalg.norm(zw[trigger], axis=1))
        xi[trigger] = 0.0
        due = t_new >= tau + consts.t_sync - 1e-9 * consts.t_sync
    switched = due & ~mu
    return x, u, y, v, anchor, g_anchor, d_new, due, dist, z, zw, switched


def ud_coupled_step(potential: PotentialModel, state: UdCouplingState,
                    consts: CouplingConstants, delta: float, substep: float,
                    noise=None, rng=None) -> UdCouplingState:
    """Advance the switched coupling by a single integrator substep.

    substep must divide delta; the gradient anchor refreshes whenever the new
    time crosses a freeze-window boundary. The ensemble runner drives the
    same core with cached gradients; this entry point recomputes them from
    the state, which is fine for step-at-a-time use.
    """
    if substep <= 0 or substep > delta:
        raise ValueError("need 0 < substep <= delta")
    ratio = delta / substep
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise ValueError(f"substep {substep} does not divide delta {delta}")
    n, d = state.x.shape
    if noise is None:
        noise = (rng or np.random.default_rng()).standard_normal((n, d))
    t_new = state.t + substep
    eps = 1e-9 * substep
    refresh = math.floor((t_new + eps) / delta) > math.floor((state.t + eps) / delta)

    g_anchor = potential.gradient(state.anchor)
    d_prev = np.linalg.norm(potential.gradient(state.x) - g_anchor, axis=1)
    tau, rho, mu, xi = (state.tau.copy(), state.rho.copy(), state.mu.copy(),
                        state.xi.copy())
    t3 = 3.0 * (consts.c_abs * consts.kappa) ** 2
    out = _ud_substep(potential, consts, substep, math.exp(-substep / t3),
                      1e-12 * max(1.0, consts.radius),
                      2.0 * math.sqrt(substep / consts.ckl), np.asarray(noise, float),
                      refresh, state.x.copy(), state.u.copy(), state.y.copy(),
                      state.v.copy(), tau, rho, mu, xi, state.anchor.copy(),
                      g_anchor, d_prev, t_new)
    x, u, y, v, anchor, _, _, mu_new, _, _, _, _ = out
    return UdCouplingState(x=x, u=u, y=y, v=v, tau=tau, rho=rho, mu=mu_new,
                           xi=xi, anchor=anchor, t=t_new)


def ud_coupled_run(potential: PotentialModel, state: UdCouplingState,
                   consts: CouplingConstants, fn: DistanceFn, delta: float,
                   substeps_per_delta: int, n_deltas: int, seed: int,
                   record_every: int = 20, track_member: int = 0) -> UdCouplingResult:
    """Advance the switched coupling for n_deltas gradient-freeze windows.

    The discrete chain (x, u) drifts on the gradient frozen at the last
    window boundary; the stationary copy (y, v) uses the live gradient. Both
    share each substep's Brownian increment, reflected across the
    (z + w)-direction while the pair is in the reflection phase. The error
    budget xi accumulates the exponentially discounted freeze-gap norm by the
    trapezoid rule and resets whenever a far-apart pair re-enters the
    synchronous phase.
    """
    _require_matching_fn(fn, consts)
    if substeps_per_delta < 1:
        raise ValueError("substeps_per_delta must be >= 1")
    h = delta / substeps_per_delta
    n, d = state.x.shape
    noise_amp = 2.0 * math.sqrt(h / consts.ckl)
    t3 = 3.0 * (consts.c_abs * consts.kappa) ** 2
    decay = math.exp(-h / t3)
    phi_tol = 1e-12 * max(1.0, consts.radius)
    gens = streams.member_generators(seed, n)

    x, u, y, v = state.x.copy(), state.u.copy(), state.y.copy(), state.v.copy()
    tau, rho, mu, xi = state.tau.copy(), state.rho.copy(), state.mu.copy(), state.xi.copy()
    anchor = state.anchor.copy()
    g_anchor = potential.gradient(anchor)
    d_prev = np.linalg.norm(potential.gradient(x) - g_anchor, axis=1)

    ev_member, ev_t, ev_zn, ev_zwn, ev_rho, ev_xi, ev_elapsed = ([] for _ in range(7))
    times, mean_lyap, se_lyap, mean_dist, frac_reflect, mean_xi = ([] for _ in range(6))
    tracked: dict[str, list] = {k: [] for k in
                                ("t", "z_norm", "w_norm", "mu", "tau", "rho", "xi", "lyap")}
    max_reflect_dist = 0.0
    min_xi = 0.0
    min_gap = math.inf
    damp = math.exp(-2.75 * consts.l_smooth * consts.radius ** 2) \
        if 2.75 * consts.l_smooth * consts.radius ** 2 < 700 else 0.0

    def lyap_now(t, z, zw):
        arg = consts.weight * np.linalg.norm(z, axis=1) + np.linalg.norm(zw, axis=1)
        sync = fn.f(rho) * np.exp(-consts.c_sync * (t - tau)) + xi
        return np.where(mu, fn.f(arg), sync), arg

    def record(t, z, zw, dist):
        nonlocal min_gap
        vals, _ = lyap_now(t, z, zw)
        times.append(t)
        mean_lyap.append(float(vals.mean()))
        se_lyap.append(float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
        mean_dist.append(float(dist.mean()))
        frac_reflect.append(float(mu.mean()))
        mean_xi.append(float(xi.mean()))
        if damp > 0:
            lower = (damp / 5.0) * (np.linalg.norm(z, axis=1)
                                    + np.linalg.norm(zw - z, axis=1))
            min_gap = min(min_gap, float(np.min(vals - lower)))
        if track_member is not None:
            i = track_member
            for key, val in (("t", t), ("z_norm", float(np.linalg.norm(z[i]))),
                             ("w_norm", float(np.linalg.norm(zw[i] - z[i]))),
                             ("mu", float(mu[i])), ("tau", float(tau[i])),
                             ("rho", float(rho[i])), ("xi", float(xi[i])),
                             ("lyap", float(vals[i]))):
                tracked[key].append(val)

    z = x - y
    zw = z + (u - v)
    record(state.t, z, zw, _pair_dist(z, zw))

    total = n_deltas * substeps_per_delta
    chunk = streams.chunk_steps(total, n, d)
    k = 0
    while k < total:
        take = min(chunk, total - k)
        noise = streams.stacked_normals(gens, take, d)
        for j in range(take):
            k += 1
            t = state.t + k * h
            (x, u, y, v, anchor, g_anchor, d_prev, mu_new, dist, z, zw,
             switched) = _ud_substep(
                potential, consts, h, decay, phi_tol, noise_amp, noise[j],
                k % substeps_per_delta == 0, x, u, y, v, tau, rho, mu, xi,
                anchor, g_anchor, d_prev, t)
            if switched.any():
                idx = np.where(switched)[0]
                ev_member.append(idx)
                ev_t.append(np.full(idx.size, t))
                ev_zn.append(np.linalg.norm(z[idx], axis=1))
                ev_zwn.append(np.linalg.norm(zw[idx], axis=1))
                ev_rho.append(rho[idx].copy())
                ev_xi.append(xi[idx].copy())
                ev_elapsed.append(t - tau[idx])
            mu = mu_new

            if mu.any():
                max_reflect_dist = max(max_reflect_dist, float(dist[mu].max()))
            min_xi = min(min_xi, float(xi.min()))
            if k % record_every == 0 or k == total:
                record(t, z, zw, dist)

    if ev_member:
        events = SwitchEvents(np.concatenate(ev_member), np.concatenate(ev_t),
                              np.concatenate(ev_zn), np.concatenate(ev_zwn),
                              np.concatenate(ev_rho), np.concatenate(ev_xi),
                              np.concatenate(ev_elapsed))
    else:
        events = SwitchEvents.empty()
    return UdCouplingResult(
        times=np.array(times), mean_lyap=np.array(mean_lyap),
        se_lyap=np.array(se_lyap), mean_dist=np.array(mean_dist),
        frac_reflect=np.array(frac_reflect), mean_xi=np.array(mean_xi),
        events=events, max_reflect_dist=max_reflect_dist, min_xi=min_xi,
        min_sandwich_gap=min_gap, delta=delta, substep=h, consts=consts,
        tracked={k: np.array(v) for k, v in tracked.items()},
        metadata={"ensemble": n, "seed": seed,
                  "initial_coupling": "independent" if d > 1 else "monotone"})


@dataclass
class JumpViolation:
    member: int
    t: float
    lhs: float
    rhs: float

    def to_dict(self):
        return asdict(self)


def check_jump_nonpositive(events_or_trace, fn: DistanceFn,
                           consts: CouplingConstants,
                           tol_factor: float = 1e-3,
                           tol_abs: float = 0.0) -> list[JumpViolation]:
    """Verify the switch-time inequality
    f(weight ||z|| + ||z + w||) <= f(rho) exp(-c_sync * elapsed) + xi + tol
    at every synchronous-to-reflection switch. Accepts the runner's captured
    events or a dense (per-substep) trace of state dicts."""
    _require_matching_fn(fn, consts)
    ev = events_or_trace
    if not isinstance(ev, SwitchEvents):
        ev = _events_from_trace(ev)
    if ev.member.size == 0:
        return []
    lhs = fn.f(consts.weight * ev.z_norm + ev.zw_norm)
    f_rho = fn.f(ev.rho)
    rhs = f_rho * np.exp(-consts.c_sync * ev.elapsed) + ev.xi
    tol = tol_factor * f_rho + tol_abs
    bad = lhs > rhs + tol
    return [JumpViolation(int(ev.member[i]), float(ev.t[i]), float(lhs[i]), float(rhs[i]))
            for i in np.where(bad)[0]]


def _events_from_trace(trace) -> SwitchEvents:
    """Extract switch states from a dense per-substep trace. Each entry is a
    mapping with keys t, z_norm, zw_norm, mu, tau, rho, xi (arrays over the
    ensemble, or scalars for a single trajectory)."""
    member, tt, zn, zwn, rr, xx, el = ([] for _ in range(7))
    prev_mu = None
    for snap in trace:
        mu = np.atleast_1d(np.asarray(snap["mu"], dtype=bool))
        if prev_mu is not None:
            switched = mu & ~prev_mu
            if switched.any():
                idx = np.where(switched)[0]
                member.append(idx)
                for key, buf in (("z_norm", zn), ("zw_norm", zwn),
                                 ("rho", rr), ("xi", xx)):
                    buf.append(np.atleast_1d(np.asarray(snap[key], float))[idx])
                tt.append(np.full(idx.size, float(snap["t"])))
                el.append(float(snap["t"]) - np.atleast_1d(np.asarray(snap["tau"], float))[idx])
        prev_mu = mu
    if not member:
        return SwitchEvents.empty()
    return SwitchEvents(np.concatenate(member), np.concatenate(tt),
                        np.concatenate(zn), np.concatenate(zwn),
                        np.concatenate(rr), np.concatenate(xx),
                        np.concatenate(el))


def ud_em_run(potential: PotentialModel, y0, v0, substep: float,
              n_substeps: int, seed: int, c_abs: float = C_ABS):
    """Euler-Maruyama integration of the exact (live-gradient) kinetic
    diffusion alone; used to probe stationarity of the coupled partner."""
    ckl = c_abs * potential.kappa * potential.l_smooth
    y = np.array(y0, dtype=float)
    v = np.array(v0, dtype=float)
    n, d = y.shape
    amp = 2.0 * math.sqrt(substep / ckl)
    gens = streams.member_generators(seed, n)
    chunk = streams.chunk_steps(n_substeps, n, d)
    k = 0
    while k < n_substeps:
        take = min(chunk, n_substeps - k)
        noise = streams.stacked_normals(gens, take, d)
        for j in range(take):
            gy = potential.gradient(y)
            y_new = y + substep * v
            v = v + substep * (-2.0 * v - gy / ckl) + amp * noise[j]
            y = y_new
            k += 1
    return y, v


def stationary_pair_init(potential: PotentialModel, reference: np.ndarray,
                         seed: int, c_abs: float = C_ABS) -> tuple[np.ndarray, np.ndarray]:
    """(y, v) drawn from the kinetic invariant law: positions from the target
    reference, velocities independently from N(0, I / (c kappa L))."""
    rng = streams.run_generator(seed, tag=17)
    v = math.sqrt(velocity_variance(potential, c_abs)) * rng.standard_normal(reference.shape)
    return np.array(reference, dtype=float), v
