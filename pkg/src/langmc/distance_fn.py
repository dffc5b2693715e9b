"""Concave distance warp used by the coupling contraction experiments.

The warp f is built from an exponentially decaying bump psi, its integral
Psi, and a decreasing blend g:

    psi(r) = exp(-alpha_f * min(r^2, r_f^2))
    Psi(r) = integral of psi from 0 to r
    g(r)   = 1 - 0.5 * H(min(r, r_f)) / H(r_f),   H(r) = int_0^r Psi/psi
    f(r)   = integral of psi * g from 0 to r

f is concave, increases from f(0)=0 with unit initial slope, and is exactly
linear with slope psi(r_f)/2 beyond r_f. Applying f to the distance between
two coupled processes turns reflection-coupling drift into a strict
contraction even where the potential is nonconvex.

Psi has a closed form in erf; H and f are tabulated by cumulative adaptive
Simpson quadrature on node grids refined where the integrands move fastest,
then interpolated with cubic Hermite splines whose node derivatives are the
exact integrands.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import erf

from ._quad import adaptive_simpson

_SQRT_PI = math.sqrt(math.pi)


class DistanceFnError(ValueError):
    """Bad parameters or out-of-domain argument for the distance warp."""


def _nodes(alpha_f: float, r_f: float, base: int) -> np.ndarray:
    """Node grid on [0, r_f]: uniform in r unioned with uniform in the
    exponent alpha*r^2, so steep exponential growth stays resolved."""
    lin = np.linspace(0.0, r_f, base + 1)
    expo_span = alpha_f * r_f * r_f
    n_expo = min(20000, max(base, int(math.ceil(expo_span / 0.05))))
    expo = np.sqrt(np.linspace(0.0, expo_span, n_expo + 1) / alpha_f)
    nodes = np.unique(np.concatenate([lin, np.minimum(expo, r_f)]))
    # collapse near-coincident nodes; splines need strict monotonicity
    keep = np.concatenate([[True], np.diff(nodes) > 1e-12 * max(r_f, 1.0)])
    nodes = nodes[keep]
    nodes[-1] = r_f
    return nodes


class DistanceFn:
    """Immutable concave warp with tabulated g and f; safe to share."""

    def __init__(self, alpha_f: float, r_f: float, tol: float = 1e-10,
                 grid_points: int = 512):
        if alpha_f <= 0 or r_f <= 0:
            raise DistanceFnError(f"alpha_f and r_f must be positive, got ({alpha_f}, {r_f})")
        if alpha_f * r_f * r_f > 350.0:
            raise DistanceFnError(
                f"alpha_f * r_f^2 = {alpha_f * r_f * r_f:.1f} too large: "
                "the nested integrand exp(alpha*r^2) would overflow")
        self.alpha_f = float(alpha_f)
        self.r_f = float(r_f)
        self.tol = float(tol)
        self.psi_cap = math.exp(-self.alpha_f * self.r_f**2)

        nodes = _nodes(self.alpha_f, self.r_f, grid_points)
        # H(r) = int_0^r Psi/psi: cumulative Simpson per segment, Hermite
        # spline with the exact integrand as node derivative.
        integrand_h = self._ratio_scalar
        seg = np.array([adaptive_simpson(integrand_h, a, b, tol)
                        for a, b in zip(nodes[:-1], nodes[1:])])
        h_vals = np.concatenate([[0.0], np.cumsum(seg)])
        self.h_cap = float(h_vals[-1])
        self._h_spline = CubicHermiteSpline(nodes, h_vals, self._ratio(nodes))

        # f on [0, r_f] the same way with integrand psi*g (needs H above).
        def integrand_f(s: float) -> float:
            return math.exp(-self.alpha_f * s * s) * self._g_scalar(s)

        seg_f = np.array([adaptive_simpson(integrand_f, a, b, tol)
                          for a, b in zip(nodes[:-1], nodes[1:])])
        f_vals = np.concatenate([[0.0], np.cumsum(seg_f)])
        self.f_cap = float(f_vals[-1])
        self._f_spline = CubicHermiteSpline(nodes, f_vals, self.psi(nodes) * self.g(nodes))
        self._nodes = nodes

    # -- scalar helpers used while building the tables -----------------------

    def _ratio_scalar(self, s: float) -> float:
        # Psi(s)/psi(s) on [0, r_f]
        a = self.alpha_f
        cap = 0.5 * _SQRT_PI / math.sqrt(a) * erf(math.sqrt(a) * s)
        return cap * math.exp(a * s * s)

    def _g_scalar(self, s: float) -> float:
        if s >= self.r_f:
            return 0.5
        return 1.0 - 0.5 * float(self._h_spline(s)) / self.h_cap

    # -- public surface -------------------------------------------------------

    def _check(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DistanceFnError("distance argument must be nonnegative")
        return r

    def psi(self, r):
        r = self._check(r)
        return np.exp(-self.alpha_f * np.minimum(r * r, self.r_f**2))

    def capital_psi(self, r):
        """Integral of psi from 0 to r (closed form via erf, exact)."""
        r = self._check(r)
        a = self.alpha_f
        inner = 0.5 * _SQRT_PI / math.sqrt(a) * erf(math.sqrt(a) * np.minimum(r, self.r_f))
        return inner + self.psi_cap * np.maximum(r - self.r_f, 0.0)

    def _ratio(self, r):
        r = np.asarray(r, dtype=float)
        a = self.alpha_f
        return (0.5 * _SQRT_PI / math.sqrt(a) * erf(math.sqrt(a) * r)
                * np.exp(a * r * r))

    def g(self, r):
        r = self._check(r)
        inner = np.minimum(r, self.r_f)
        vals = 1.0 - 0.5 * self._h_spline(inner) / self.h_cap
        return np.where(r >= self.r_f, 0.5, np.clip(vals, 0.5, 1.0))

    def fprime(self, r):
        return self.psi(r) * self.g(r)

    def f(self, r):
        r = self._check(r)
        inside = np.minimum(r, self.r_f)
        vals = np.asarray(self._f_spline(inside), dtype=float)
        # exactly linear with slope psi(r_f)/2 past the cap radius
        vals = vals + 0.5 * self.psi_cap * np.maximum(r - self.r_f, 0.0)
        return np.maximum(vals, 0.0) if vals.ndim else max(float(vals), 0.0)

    def f_and_fprime(self, r):
        return self.f(r), self.fprime(r)

    def fsecond_fd(self, r, h: float = 1e-5):
        """Second derivative by central differences of fprime.

        Near r = 0 the stencil is clipped to the domain (one-sided there).
        """
        r = self._check(r)
        lo = np.maximum(r - h, 0.0)
        hi = r + h
        return (self.fprime(hi) - self.fprime(lo)) / (hi - lo)

    def fsecond_analytic(self, r):
        """Closed-form psi' g + psi g' cross-check (zero past the cap)."""
        r = self._check(r)
        inside = r < self.r_f
        psi = self.psi(r)
        dpsi = np.where(inside, -2.0 * self.alpha_f * r * psi, 0.0)
        dg = np.where(inside, -0.5 * self._ratio(np.minimum(r, self.r_f)) / self.h_cap, 0.0)
        return dpsi * self.g(r) + psi * dg

    # -- table export ----------------------------------------------------------

    def default_grid(self, n: int = 1024) -> np.ndarray:
        """Geometric grid up to 10 * r_f (with zero prepended)."""
        return np.concatenate([[0.0], np.geomspace(self.r_f * 1e-3, 10.0 * self.r_f, n)])

    def table(self, grid=None) -> dict[str, np.ndarray]:
        r = self.default_grid() if grid is None else self._check(grid)
        return {"r": r, "psi": self.psi(r), "capital_psi": self.capital_psi(r),
                "g": self.g(r), "f": self.f(r), "fprime": self.fprime(r)}

    def dump_csv(self, path, grid=None) -> None:
        tab = self.table(grid)
        cols = ["r", "psi", "capital_psi", "g", "f", "fprime"]
        data = np.column_stack([tab[c] for c in cols])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="")


def check_f_properties(fn: DistanceFn, grid=None, cs=(0.1, 0.5, 0.9),
                       fd_step: float = 1e-5) -> dict:
    """Worst-case margins of the six contract properties of f on a grid.

    Every margin is written so that <= 0 means the property holds. The grid
    keeps a 2*fd_step guard band around the cap radius where the finite-
    difference stencil for f'' would straddle the kink.
    """
    if grid is None:
        grid = np.linspace(0.0, 3.0 * fn.r_f, 1000)
    grid = np.asarray(grid, dtype=float)
    guard = np.abs(grid - fn.r_f) > 2.0 * fd_step
    r = grid[guard]
    cap = math.exp(-fn.alpha_f * fn.r_f**2)

    f, fp = fn.f_and_fprime(r)
    fpp = fn.fsecond_fd(r, fd_step)

    out = {
        "f0": abs(float(fn.f(0.0))),
        "fprime0": abs(float(fn.fprime(0.0)) - 1.0),
        "f2_upper": float(np.max(fp - 1.0)),
        "f2_lower": float(np.max(0.5 * cap - fp)),
        "f3_upper": float(np.max(f - r)),
        "f3_lower": float(np.max(0.5 * cap * r - f)),
    }

    inner = r <= fn.r_f
    ri, fi, fpi, fppi = r[inner], f[inner], fp[inner], fpp[inner]
    out["f4"] = float(np.max(fppi + fn.alpha_f * ri * fpi + (cap / fn.r_f**2) * fi))
    out["f4_doubled"] = float(np.max(fppi + 2.0 * fn.alpha_f * ri * fpi + (cap / fn.r_f**2) * fi))
    out["f5_concave"] = float(np.max(fpp))
    beyond = r > fn.r_f
    out["f5_linear"] = float(np.max(np.abs(fpp[beyond]))) if beyond.any() else 0.0

    if fn.alpha_f * fn.r_f**2 >= math.log(2.0):
        worst = -np.inf
        pos = r[r > 0]
        for c in cs:
            lhs = fn.f(pos)
            rhs = math.exp(-c * cap / 4.0) * fn.f((1.0 + c) * pos)
            worst = max(worst, float(np.max(lhs - rhs)))
        out["f6"] = worst
    else:
        out["f6"] = None
    return out
