"""Optimal retention level: the minimizer of ``gamma_minus`` over [0, 1].

Because ``G_b(x) = -exp(gamma_minus(b) x) / gamma_minus(b)`` is increasing in
``gamma_minus(b)`` for every ``x >= 0``, the level minimizing ``gamma_minus``
minimizes the injection cost uniformly in the surplus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import Custom, ExcessOfLoss, Problem, Proportional
from .numerics import BracketFailure, bisect, golden_section
from .roots import gamma_minus

__all__ = [
    "BracketFailure",
    "LevelSolution",
    "Method",
    "SolveOptions",
    "interiority_threshold",
    "phi_proportional",
    "psi_excess_of_loss",
    "solve_level",
]

PSI_SENTINEL = -1e300
# psi diverges at b = 1; grids stop short of it
XL_GRID_TOP = 1.0 - 1e-9


class Method(str, Enum):
    PHI_ROOT = "PhiRoot"
    PSI_ROOT = "PsiRoot"
    DIRECT_SCAN = "DirectScan"


@dataclass(frozen=True)
class SolveOptions:
    xtol: float = 1e-12
    ftol: float | None = None  # default 1e-10 * max(1, |theta|)
    maxiter: int = 200
    grid: int = 2048


@dataclass(frozen=True)
class LevelSolution:
    b_star: float
    gamma_star: float
    method: Method
    interior: bool
    residual: float = 0.0
    candidates: tuple[float, ...] = field(default=())


def phi_proportional(b: float, problem: Problem) -> float:
    """First-order function of the proportional family, ``sigma2*b*gamma_minus(b) + mu*theta``.

    ``gamma_minus`` has the same sign of derivative as ``-phi``; its unique zero is
    the optimal level when it lies in (0, 1).
    """
    return problem.sigma2 * b * gamma_minus(b, problem) + problem.mu * problem.params.theta


def psi_excess_of_loss(b: float, problem: Problem) -> float:
    """First-order function of the excess-of-loss family, ``b/(1-b)*gamma_minus(b) + theta``."""
    if b >= 1.0 - 1e-12:
        return PSI_SENTINEL
    return b / (1.0 - b) * gamma_minus(b, problem) + problem.params.theta


def interiority_threshold(problem: Problem) -> float:
    """Reinsurer loading above which proportional reinsurance is never worth buying."""
    p = problem.params
    mu, s2 = problem.mu, problem.sigma2
    return p.eta + math.sqrt(p.eta**2 + 2.0 * p.rho * s2 / (p.lam * mu**2))


def _proportional_interior(problem: Problem) -> bool:
    p = problem.params
    if problem.law.premium_mean == problem.mu:
        return p.eta < p.theta < interiority_threshold(problem)
    # non-standard premium base: the closed form no longer applies, use phi(1) < 0
    return phi_proportional(1.0, problem) < 0.0


def _ftol(problem: Problem, options: SolveOptions) -> float:
    if options.ftol is not None:
        return options.ftol
    return 1e-10 * max(1.0, abs(problem.params.theta))


def _solve_proportional(problem: Problem, options: SolveOptions) -> LevelSolution:
    if not _proportional_interior(problem):
        return LevelSolution(1.0, gamma_minus(1.0, problem), Method.PHI_ROOT, False)
    res = bisect(
        lambda b: phi_proportional(b, problem),
        0.0,
        1.0,
        xtol=options.xtol,
        ftol=_ftol(problem, options),
        maxiter=options.maxiter,
    )
    b = res.root
    return LevelSolution(b, gamma_minus(b, problem), Method.PHI_ROOT, b < 1.0, res.residual, (b,))


def _pick(problem: Problem, candidates: list[float]) -> tuple[float, float]:
    """Smallest candidate among those tying for the least gamma_minus."""
    values = [gamma_minus(b, problem) for b in candidates]
    g_min = min(values)
    tie = 1e-12 * abs(g_min)
    for b, g in sorted(zip(candidates, values)):
        if g <= g_min + tie:
            return b, g
    raise AssertionError("unreachable")


def _solve_excess_of_loss(problem: Problem, options: SolveOptions) -> LevelSolution:
    grid = np.linspace(0.0, XL_GRID_TOP, options.grid)
    vals = np.array([psi_excess_of_loss(b, problem) for b in grid])
    ftol = _ftol(problem, options)
    roots = []
    for i in range(len(grid) - 1):
        lo, hi = vals[i], vals[i + 1]
        if lo == 0.0:
            roots.append((float(grid[i]), 0.0))
        elif lo * hi < 0.0:
            res = bisect(
                lambda b: psi_excess_of_loss(b, problem),
                float(grid[i]),
                float(grid[i + 1]),
                xtol=options.xtol,
                ftol=ftol,
                maxiter=options.maxiter,
            )
            roots.append((res.root, res.residual))
    if not roots:
        raise BracketFailure("psi has no sign change on [0, 1): inconsistent moment family")
    b, g = _pick(problem, [r for r, _ in roots])
    residual = dict(roots)[b]
    return LevelSolution(b, g, Method.PSI_ROOT, True, residual, tuple(r for r, _ in roots))


def _solve_direct(problem: Problem, options: SolveOptions) -> LevelSolution:
    grid = np.linspace(0.0, 1.0, options.grid)
    vals = np.array([gamma_minus(b, problem) for b in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    b_gs = golden_section(lambda b: gamma_minus(b, problem), float(lo), float(hi), tol=options.xtol)
    b, g = _pick(problem, [float(grid[i]), b_gs])
    return LevelSolution(b, g, Method.DIRECT_SCAN, b < 1.0, 0.0, (b,))


def solve_level(problem: Problem, options: SolveOptions | None = None) -> LevelSolution:
    """Optimal constant retention level for ``problem``."""
    options = options or SolveOptions()
    ret = problem.retention
    if isinstance(ret, Proportional):
        return _solve_proportional(problem, options)
    if isinstance(ret, ExcessOfLoss):
        return _solve_excess_of_loss(problem, options)
    if isinstance(ret, Custom):
        return _solve_direct(problem, options)
    raise TypeError(f"unsupported retention {ret!r}")
