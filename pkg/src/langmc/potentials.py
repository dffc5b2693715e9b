"""Potential functions with declared smoothness/convexity constants.

A potential here is the negative log-density of the target distribution,
smooth everywhere (gradient Lipschitz constant L) and strongly convex with
constant m outside a ball of radius R. Each benchmark self-reports (L, m, R)
values that hold by construction, and ``audit_constants`` checks the declared
contract empirically by sampling point pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import minimize


class PotentialError(ValueError):
    """Bad input to a potential evaluation (dimension or non-finite values)."""


class PotentialModel:
    """Base class: evaluatable potential with declared constants.

    Subclasses implement ``value_and_grad`` for batches of shape (n, dim).
    All evaluations are pure and reentrant.
    """

    def __init__(self, dim: int, l_smooth: float, m_convex: float, radius: float):
        if dim < 1:
            raise PotentialError(f"dim must be a positive integer, got {dim}")
        if l_smooth <= 0 or m_convex <= 0:
            raise PotentialError("L and m must be positive")
        if radius < 0:
            raise PotentialError("radius must be nonnegative")
        if l_smooth < m_convex * (1 - 1e-12):
            raise PotentialError(f"condition number L/m < 1 (L={l_smooth}, m={m_convex})")
        self.dim = int(dim)
        self.l_smooth = float(l_smooth)
        self.m_convex = float(m_convex)
        self.radius = float(radius)

    @property
    def kappa(self) -> float:
        return self.l_smooth / self.m_convex

    # -- evaluation ---------------------------------------------------------

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Potential values (n,) and gradients (n, dim) for a batch (n, dim)."""
        raise NotImplementedError

    def _check_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise PotentialError(
                f"state has dimension {x.shape[-1] if x.ndim else 0}, potential expects {self.dim}")
        if not np.all(np.isfinite(x)):
            raise PotentialError("non-finite coordinate in state vector")
        return x

    def evaluate(self, x: np.ndarray) -> tuple[float | np.ndarray, np.ndarray]:
        """Value and gradient; accepts a single vector or a batch."""
        single = np.asarray(x).ndim == 1
        xb = self._check_batch(x)
        v, g = self.value_and_grad(xb)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(g))):
            raise PotentialError("potential evaluation produced non-finite output")
        if single:
            return float(v[0]), g[0]
        return v, g

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)[1]

    def spec_block(self) -> dict:
        """Serializable {kind, dim, params...} description."""
        raise NotImplementedError


class Quadratic(PotentialModel):
    """Isotropic quadratic bowl 0.5 * strength * ||x||^2.

    L = m = strength exactly; the declared radius is free (the convexity
    contract holds outside any ball) and defaults to 1 so radius-dependent
    experiments stay well defined.
    """

    def __init__(self, dim: int, strength: float = 1.0, radius: float = 1.0):
        super().__init__(dim, strength, strength, radius)
        self.strength = float(strength)

    def value_and_grad(self, x):
        v = 0.5 * self.strength * np.sum(x * x, axis=-1)
        return v, self.strength * x

    def spec_block(self):
        return {"kind": "quadratic", "dim": self.dim,
                "strength": self.strength, "radius": self.radius}


class GaussianMixture(PotentialModel):
    """Negative log-density of an equal-covariance Gaussian mixture.

    Shared covariance sigma2 * I. Declared constants:
      L = 1/sigma2 + D^2/(4 sigma2^2)   (conservative Hessian bound, D = max
                                         pairwise center distance)
      R = 2 D, m = 1/(2 sigma2)          (from grad U(x) = (x - cbar(x))/sigma2
                                         with cbar in the centers' convex hull)
    A single component degenerates to a Gaussian: m = L = 1/sigma2, R = sigma.
    If the mixture's gradient does not vanish at the origin, the whole
    potential is shifted so a stationary point sits at zero.
    """

    def __init__(self, dim: int, centers, sigma2: float = 1.0, weights=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[1] != dim:
            raise PotentialError(f"centers have dim {centers.shape[1]}, expected {dim}")
        if sigma2 <= 0:
            raise PotentialError("sigma2 must be positive")
        k = centers.shape[0]
        if weights is None:
            weights = np.full(k, 1.0 / k)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (k,) or np.any(weights <= 0):
            raise PotentialError("weights must be positive, one per center")
        weights = weights / weights.sum()

        diff = centers[:, None, :] - centers[None, :, :]
        diam = float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))
        if diam > 0:
            l_smooth = 1.0 / sigma2 + diam**2 / (4.0 * sigma2**2)
            m_convex = 1.0 / (2.0 * sigma2)
            radius = 2.0 * diam
        else:
            l_smooth = m_convex = 1.0 / sigma2
            radius = float(np.sqrt(sigma2))
        super().__init__(dim, l_smooth, m_convex, radius)
        self.sigma2 = float(sigma2)
        self.centers = centers
        self.weights = weights
        self.diameter = diam
        self._log_w = np.log(weights)
        self._symmetric_pair = False
        self._recenter()
        # symmetric two-component case reduces to a log-cosh correction of a
        # quadratic; that closed form is much cheaper in the sampler loops
        self._symmetric_pair = (
            k == 2 and np.allclose(self.centers[0], -self.centers[1])
            and abs(weights[0] - 0.5) < 1e-12)

    def _recenter(self):
        g0 = self.value_and_grad(np.zeros((1, self.dim)))[1][0]
        if np.linalg.norm(g0) <= 1e-9:
            return
        start = self.centers[int(np.argmax(self.weights))]
        res = minimize(lambda x: self.value_and_grad(x[None, :])[0][0], start,
                       jac=lambda x: self.value_and_grad(x[None, :])[1][0],
                       method="BFGS", options={"gtol": 1e-12})
        self.centers = self.centers - res.x

    def value_and_grad(self, x):
        # U(x) = -log sum_i w_i N(x; c_i, sigma2 I), dropping the constant
        # normalization. Stable shifted-exponential sum (this sits in the
        # samplers' hot loop, so no scipy call here).
        if self._symmetric_pair:
            c = self.centers[0]
            t = (x @ c) / self.sigma2
            v = (0.5 * (np.sum(x * x, axis=-1) + c @ c) / self.sigma2
                 - np.logaddexp(t, -t) + math.log(2.0))
            g = (x - np.tanh(t)[:, None] * c[None, :]) / self.sigma2
            return v, g
        d2 = np.sum((x[:, None, :] - self.centers[None, :, :])**2, axis=-1)
        expo = -0.5 * d2 / self.sigma2 + self._log_w[None, :]
        mx = expo.max(axis=1)
        resp = np.exp(expo - mx[:, None])
        total = resp.sum(axis=1)
        v = -(mx + np.log(total))
        cbar = (resp / total[:, None]) @ self.centers
        g = (x - cbar) / self.sigma2
        return v, g

    def spec_block(self):
        return {"kind": "gaussian_mixture", "dim": self.dim,
                "centers": self.centers.tolist(), "sigma2": self.sigma2,
                "weights": self.weights.tolist()}


class SmoothedDoubleWell(PotentialModel):
    """Two wells on the first coordinate, blended from quadratic pieces.

    Profile along coordinate 0: a downward parabola of curvature hill_curv on
    |t| <= s matched C^1 to well parabolas of curvature well_curv centered at
    +-a, with s = a * well_curv / (well_curv + hill_curv). Remaining
    coordinates carry 0.5 * well_curv * ||x_perp||^2. Constants are exact:
      L = max(well_curv, hill_curv), R = 4a, m = well_curv / 2.
    A raw quartic well has unbounded curvature, so this blended form is what
    keeps the global Lipschitz-gradient contract honest.
    """

    def __init__(self, dim: int, well_offset: float = 1.0,
                 well_curv: float = 1.0, hill_curv: float = 1.0):
        if well_offset <= 0 or well_curv <= 0 or hill_curv <= 0:
            raise PotentialError("well_offset, well_curv, hill_curv must be positive")
        super().__init__(dim, max(well_curv, hill_curv), 0.5 * well_curv, 4.0 * well_offset)
        self.well_offset = float(well_offset)
        self.well_curv = float(well_curv)
        self.hill_curv = float(hill_curv)
        self.blend = well_offset * well_curv / (well_curv + hill_curv)
        # value offset making the profile continuous at the blend point
        s, a = self.blend, self.well_offset
        self._hill_const = 0.5 * well_curv * (s - a)**2 + 0.5 * hill_curv * s**2

    def _profile(self, t):
        a, s = self.well_offset, self.blend
        at = np.abs(t)
        hill = np.abs(t) <= s
        v = np.where(hill, self._hill_const - 0.5 * self.hill_curv * t**2,
                     0.5 * self.well_curv * (at - a)**2)
        g = np.where(hill, -self.hill_curv * t,
                     self.well_curv * (at - a) * np.sign(t))
        return v, g

    def value_and_grad(self, x):
        v0, g0 = self._profile(x[:, 0])
        rest = x[:, 1:]
        v = v0 + 0.5 * self.well_curv * np.sum(rest * rest, axis=-1)
        g = np.empty_like(x)
        g[:, 0] = g0
        g[:, 1:] = self.well_curv * rest
        return v, g

    def spec_block(self):
        return {"kind": "double_well", "dim": self.dim,
                "well_offset": self.well_offset, "well_curv": self.well_curv,
                "hill_curv": self.hill_curv}


class ShiftedPotential(PotentialModel):
    """The same potential with the coordinate system translated by `shift`."""

    def __init__(self, base: PotentialModel, shift):
        super().__init__(base.dim, base.l_smooth, base.m_convex, base.radius)
        self.base = base
        self.shift = np.asarray(shift, dtype=float).reshape(base.dim)

    def value_and_grad(self, x):
        return self.base.value_and_grad(x + self.shift[None, :])

    def spec_block(self):
        block = dict(self.base.spec_block())
        block["shift"] = self.shift.tolist()
        return block


class DeclaredConstantsOverride(PotentialModel):
    """Wrapper that swaps the declared (L, m, R) without touching the evaluator.

    Used to exercise audit failures with deliberately wrong declarations.
    """

    def __init__(self, base: PotentialModel, l_smooth=None, m_convex=None, radius=None):
        super().__init__(base.dim,
                         base.l_smooth if l_smooth is None else l_smooth,
                         base.m_convex if m_convex is None else m_convex,
                         base.radius if radius is None else radius)
        self.base = base

    def value_and_grad(self, x):
        return self.base.value_and_grad(x)

    def spec_block(self):
        return self.base.spec_block()


# -- construction from config blocks ----------------------------------------

_KINDS = {"quadratic", "gaussian_mixture", "double_well"}


def make_potential(block: dict) -> PotentialModel:
    """Build a potential from a {kind, dim, params...} mapping."""
    if "kind" not in block:
        raise PotentialError("potential block needs a 'kind' field")
    kind = block["kind"]
    if kind not in _KINDS:
        raise PotentialError(f"unknown potential kind {kind!r}; expected one of {sorted(_KINDS)}")
    dim = int(block.get("dim", 0))
    params = {k: v for k, v in block.items() if k not in ("kind", "dim", "shift")}
    if kind == "quadratic":
        pot = Quadratic(dim, **params)
    elif kind == "gaussian_mixture":
        pot = GaussianMixture(dim, **params)
    else:
        pot = SmoothedDoubleWell(dim, **params)
    if "shift" in block:
        pot = ShiftedPotential(pot, block["shift"])
    return pot


def load_potential(path: str) -> PotentialModel:
    """Read a potential spec block from a .toml or .json file."""
    text = open(path, "rb").read()
    if str(path).endswith(".json"):
        block = json.loads(text)
    else:
        import tomli
        block = tomli.loads(text.decode())
        if "potential" in block:
            block = block["potential"]
    return make_potential(block)


# -- audits ------------------------------------------------------------------

@dataclass
class AuditViolation:
    assumption: str
    x: list
    y: list
    observed: float
    declared: float


@dataclass
class AuditReport:
    """Result of the sampled-pair check of the declared (L, m, R) contract."""
    passed: bool
    lipschitz_max_ratio: float
    convexity_min_ratio: float
    inner_min_ratio: float
    grad_origin_norm: float
    n_pairs: int
    n_outside: int
    declared_l: float
    declared_m: float
    declared_r: float
    tol: float
    seed: int
    violations: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _sample_pairs(potential: PotentialModel, n: int, rng: np.random.Generator,
                  center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pair cloud: uniform ball of radius 3R plus Gaussian tails, and a
    stratum of pairs placed just outside the declared radius where the
    convexity contract is tightest."""
    d = potential.dim
    scale = max(potential.radius, 1.0)

    def cloud(k):
        u = rng.standard_normal((k, d))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
        radii = 3.0 * scale * rng.random(k) ** (1.0 / d)
        pts = u * radii[:, None]
        tails = rng.random(k) < 0.25
        pts[tails] += 2.0 * scale * rng.standard_normal((int(tails.sum()), d))
        return pts + center[None, :]

    n_near = n // 3
    x = cloud(n)
    y = np.empty_like(x)
    y[n_near:] = cloud(n - n_near)
    # near-threshold stratum: separation in (R, 2R]
    direction = rng.standard_normal((n_near, d))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    sep = potential.radius * (1.0 + rng.random(n_near)) if potential.radius > 0 \
        else scale * (1.0 + rng.random(n_near))
    y[:n_near] = x[:n_near] + direction * sep[:, None]
    return x, y


def audit_constants(potential: PotentialModel, pair_budget: int, rng_seed: int,
                    tol: float = 1e-6, center=None) -> AuditReport:
    """Empirically check the declared contract on sampled point pairs.

    Lipschitz: max ||grad U(x) - grad U(y)|| / ||x - y|| must be <= L (1 + tol).
    Outer convexity: min <grad U(x) - grad U(y), x - y> / ||x - y||^2 over pairs
    separated by more than R must be >= m (1 - tol). Violations are reported
    with witness pairs rather than raised.
    """
    if pair_budget < 1:
        raise ValueError("pair_budget must be >= 1")
    rng = np.random.default_rng(rng_seed)
    center = np.zeros(potential.dim) if center is None else np.asarray(center, float)
    x, y = _sample_pairs(potential, int(pair_budget), rng, center)

    gx = potential.gradient(x)
    gy = potential.gradient(y)
    dx = x - y
    dg = gx - gy
    sep = np.linalg.norm(dx, axis=1)
    keep = sep > 1e-12
    sep, dx, dg, x, y = sep[keep], dx[keep], dg[keep], x[keep], y[keep]

    lip = np.linalg.norm(dg, axis=1) / sep
    inner = np.sum(dg * dx, axis=1) / sep**2
    outside = sep > potential.radius
    inside = ~outside

    lip_max = float(lip.max())
    conv_min = float(inner[outside].min()) if outside.any() else float("inf")
    inner_min = float(inner[inside].min()) if inside.any() else float("nan")
    g0 = float(np.linalg.norm(potential.gradient(center)))

    violations = []
    if lip_max > potential.l_smooth * (1.0 + tol):
        i = int(np.argmax(lip))
        violations.append(AuditViolation("gradient-lipschitz", x[i].tolist(),
                                         y[i].tolist(), lip_max, potential.l_smooth))
    if outside.any() and conv_min < potential.m_convex * (1.0 - tol):
        idx = np.where(outside)[0]
        i = int(idx[np.argmin(inner[outside])])
        violations.append(AuditViolation("outer-strong-convexity", x[i].tolist(),
                                         y[i].tolist(), conv_min, potential.m_convex))
    if g0 > tol * max(1.0, potential.l_smooth):
        violations.append(AuditViolation("stationary-at-origin",
                                         center.tolist(), center.tolist(),
                                         g0, 0.0))

    return AuditReport(
        passed=not violations,
        lipschitz_max_ratio=lip_max,
        convexity_min_ratio=conv_min,
        inner_min_ratio=inner_min,
        grad_origin_norm=g0,
        n_pairs=int(sep.size),
        n_outside=int(outside.sum()),
        declared_l=potential.l_smooth,
        declared_m=potential.m_convex,
        declared_r=potential.radius,
        tol=tol,
        seed=int(rng_seed),
        violations=[asdict(v) for v in violations],
    )


def check_gradient_fd(potential: PotentialModel, x: np.ndarray, h: float = 1e-5) -> float:
    """Max componentwise gap between central finite differences and the
    analytic gradient at x."""
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float).reshape(potential.dim)
    _, g = potential.evaluate(x)
    worst = 0.0
    for i in range(potential.dim):
        e = np.zeros(potential.dim)
        e[i] = h
        vp, _ = potential.evaluate(x + e)
        vm, _ = potential.evaluate(x - e)
        worst = max(worst, abs((vp - vm) / (2.0 * h) - g[i]))
    return worst
