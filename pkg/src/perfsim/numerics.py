"""Scalar and vectorised root finding plus fixed-grid quadrature."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import integrate

BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200
QUAD_POINTS = 2001


class DomainError(ValueError):
    """An input lies outside the region where an operation is defined."""


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = BISECT_TOL,
    max_iter: int = BISECT_MAX_ITER,
) -> float:
    """Root of ``f`` on ``[lo, hi]`` by bisection.

    The bracket must straddle a sign change (a zero at either end is
    accepted).  Iteration stops once the bracket is narrower than ``tol``
    or ``f`` evaluates to exactly zero.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(f"root not bracketed on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return float(mid)
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return float(0.5 * (lo + hi))


def bisect_vec(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float = BISECT_TOL,
    max_iter: int = BISECT_MAX_ITER,
) -> np.ndarray:
    """Elementwise bisection; ``f(lo)`` and ``f(hi)`` must differ in sign per element."""
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    flo = f(lo)
    for _ in range(max_iter):
        if np.all(hi - lo < tol):
            break
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        same = np.sign(fmid) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fmid, flo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def trapezoid(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, points: int = QUAD_POINTS) -> float:
    """Composite trapezoid rule for ``f`` over ``[a, b]``."""
    if b <= a:
        return 0.0
    x = np.linspace(a, b, points)
    return float(integrate.trapezoid(f(x), x))
