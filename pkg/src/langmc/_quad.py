"""Adaptive Simpson quadrature for the distance-function tables."""

from __future__ import annotations

from typing import Callable


def adaptive_simpson(fn: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 50) -> float:
    """Integrate fn on [a, b] to absolute-or-relative tolerance tol.

    Standard recursive Simpson with the 1/15 Richardson error estimate.
    The tolerance is applied as tol * max(1, |whole|) per split, so very
    large integrals (steep exponential integrands) are resolved relatively.
    """
    if b <= a:
        return 0.0
    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(fn, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(fn, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = fn(lm), fn(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol * max(1.0, abs(left + right)):
        return left + right + err / 15.0
    half = 0.5 * tol
    return (_simpson_rec(fn, a, m, fa, flm, fm, left, half, depth - 1)
            + _simpson_rec(fn, m, b, fm, frm, fb, right, half, depth - 1))
