"""Characteristic quadratic of the surplus generator and its roots.

For a retention level ``b`` the discounted generator acting on ``e^{g y}``
gives ``Phi(b, g) = lam*M2(b)/2 * g**2 + lam*d(b) * g - rho`` with
``d(b) = theta*M1(b) - (theta - eta)*mu``. Its negative root ``gamma_minus(b)``
prices the injections under level ``b``; the two roots at ``b = 1`` span the
solutions of the pre-reinsurance ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Problem


class RootError(ArithmeticError):
    """The characteristic quadratic has no negative root (broken moment family)."""


def phi(b: float, gamma: float, problem: Problem) -> float:
    """Evaluate the characteristic quadratic ``Phi(b, gamma)``."""
    p = problem.params
    m2 = problem.moments(b)[1]
    d = problem.drift_coefficient(b)
    return 0.5 * p.lam * m2 * gamma * gamma + p.lam * d * gamma - p.rho


def _negative_root(m2: float, d: float, c: float) -> float:
    # root of m2/2 g^2 + d g - c = 0 with c = rho/lam > 0
    disc = math.sqrt(d * d + 2.0 * c * m2)
    if d <= 0.0:
        # rationalized form, finite as m2 -> 0
        return -2.0 * c / (disc - d)
    if m2 <= 0.0:
        raise RootError(f"no negative root: vanishing diffusion with drift coefficient {d} >= 0")
    return -(d + disc) / m2


def _positive_root(m2: float, d: float, c: float) -> float:
    disc = math.sqrt(d * d + 2.0 * c * m2)
    if d >= 0.0:
        return 2.0 * c / (disc + d)
    if m2 <= 0.0:
        raise RootError("no positive root with vanishing diffusion and negative drift")
    return (disc - d) / m2


def gamma_minus(b: float, problem: Problem) -> float:
    """Negative root of ``Phi(b, .)``."""
    m2 = problem.moments(b)[1]
    d = problem.drift_coefficient(b)
    return _negative_root(m2, d, problem.params.rho / problem.params.lam)


def gamma_minus_textbook(b: float, problem: Problem) -> float:
    """The unrationalized quadratic formula; 0/0 when ``M2(b) = 0``."""
    p = problem.params
    m2 = problem.moments(b)[1]
    d = problem.drift_coefficient(b)
    return -(d + math.sqrt(d * d + 2.0 * p.rho * m2 / p.lam)) / m2


def gamma_plus_1(problem: Problem) -> float:
    """Positive root of ``Phi(1, .)``."""
    return _positive_root(
        problem.sigma2, problem.drift_coefficient(1.0), problem.params.rho / problem.params.lam
    )


def vieta_check(problem: Problem) -> dict[str, float]:
    """Sum and product of the roots of ``Phi(1, .)`` against Vieta's formulas.

    With the standard premium convention the expected sum is
    ``-2*eta*mu/sigma2``; in general it is ``-2*d(1)/sigma2``.
    """
    gm, gp = gamma_minus(1.0, problem), gamma_plus_1(problem)
    s2 = problem.sigma2
    return {
        "sum": gm + gp,
        "sum_expected": -2.0 * problem.drift_coefficient(1.0) / s2,
        "product": gm * gp,
        "product_expected": -2.0 * problem.params.rho / (problem.params.lam * s2),
    }


@dataclass(frozen=True)
class RootProfile:
    """Root functions of one problem; ``gamma_plus_1`` is cached at build time."""

    problem: Problem
    gamma_plus_1: float
    gamma_minus_1: float

    @classmethod
    def build(cls, problem: Problem) -> "RootProfile":
        return cls(problem, gamma_plus_1(problem), gamma_minus(1.0, problem))

    def gamma_minus(self, b: float) -> float:
        return gamma_minus(b, self.problem)

    def drift(self, b: float) -> float:
        return self.problem.drift(b)

    def diffusion(self, b: float) -> float:
        return self.problem.diffusion(b)
