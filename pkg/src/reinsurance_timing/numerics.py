"""Bracketing root finder and golden-section minimizer used by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable


class BracketFailure(ArithmeticError):
    """The function has the same sign at both ends of the search interval."""


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    width: float
    iterations: int
    converged: bool


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-12,
    ftol: float = 1e-10,
    maxiter: int = 200,
) -> RootResult:
    """Bisection on a sign-changing bracket.

    Stops once the bracket is narrower than ``xtol`` *and* the midpoint
    residual is below ``ftol``, or when the bracket cannot shrink further.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return RootResult(lo, 0.0, 0.0, 0, True)
    if fhi == 0.0:
        return RootResult(hi, 0.0, 0.0, 0, True)
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise BracketFailure(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    mid, fmid = lo, flo
    for it in range(1, maxiter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return RootResult(mid, 0.0, hi - lo, it, True)
        if math.copysign(1.0, fmid) == math.copysign(1.0, flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= xtol and abs(fmid) <= ftol:
            return RootResult(mid, abs(fmid), hi - lo, it, True)
    # bracket exhausted: pick the endpoint with the smaller residual
    best, fbest = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    return RootResult(best, abs(fbest), hi - lo, it, abs(fbest) <= ftol or hi - lo <= xtol)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Minimizer of a unimodal ``f`` on ``[lo, hi]`` to an interval width ``tol``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        if c >= d:
            break
    x = 0.5 * (a + b)
    candidates = [(f(x), x), (fc, c), (fd, d)]
    return min(candidates)[1]
