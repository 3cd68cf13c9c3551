"""Optimal activation boundary and the assembled value functions.

Given the optimal level ``b*``, activating reinsurance at surplus ``x`` changes
the expected discounted injections by the obstacle ``f(x) = G_{b*}(x - K) - G_1(x)``.
The optimal stopping value ``F`` of that obstacle for the reflected b=1
surplus is ``C1 e^{g1 x} + C2 e^{gp x}`` below a trigger ``x*`` and ``f`` above
it, where ``x*`` solves ``Theta(x) = D(K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Problem
from .numerics import BracketFailure, bisect
from .optimizer import LevelSolution, SolveOptions, solve_level
from .roots import RootProfile, gamma_minus

_EXP_CLAMP = 700.0


class CoefficientOutOfRange(ArithmeticError):
    """The assembled coefficients violate B in (0, 1) or H < 0."""


def _exp(z):
    return np.exp(np.clip(z, -_EXP_CLAMP, _EXP_CLAMP))


def G_of_gamma(g: float, y):
    """Injection cost ``G`` for negative root ``g``; linear for negative surplus."""
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 0.0, -_exp(g * np.maximum(y, 0.0)) / g, -y - 1.0 / g)
    return out if out.ndim else float(out)


def G(b: float, y, problem: Problem):
    """Expected discounted capital injections when level ``b`` is kept from time 0."""
    return G_of_gamma(gamma_minus(b, problem), y)


@dataclass(frozen=True)
class ObstacleFn:
    """Two-piece closed form of ``f(x) = G_{b*}(x - K) - G_1(x)``."""

    b_star: float
    gm_b: float
    gm_1: float
    K: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        gb, g1, K = self.gm_b, self.gm_1, self.K
        lower = -(x - K) - 1.0 / gb + _exp(g1 * x) / g1
        upper = -_exp(gb * (x - K)) / gb + _exp(g1 * x) / g1
        out = np.where(x <= K, lower, upper)
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        gb, g1, K = self.gm_b, self.gm_1, self.K
        out = np.where(x <= K, -1.0 + _exp(g1 * x), -_exp(gb * (x - K)) + _exp(g1 * x))
        return out if out.ndim else float(out)

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        gb, g1, K = self.gm_b, self.gm_1, self.K
        out = np.where(x <= K, g1 * _exp(g1 * x), -gb * _exp(gb * (x - K)) + g1 * _exp(g1 * x))
        return out if out.ndim else float(out)

    @property
    def x_hat(self) -> float:
        """Unique global minimizer of the obstacle."""
        return self.gm_b * self.K / (self.gm_b - self.gm_1)

    @property
    def f0(self) -> float:
        gb, g1 = self.gm_b, self.gm_1
        return self.K + (gb - g1) / (g1 * gb)

    @property
    def f_min(self) -> float:
        """``f(x_hat) = -(g1 - gb)/(g1 gb) * exp(-g1 gb K/(g1 - gb))``."""
        gb, g1 = self.gm_b, self.gm_1
        return -(g1 - gb) / (g1 * gb) * math.exp(-g1 * gb * self.K / (g1 - gb))

    @property
    def case(self) -> str:
        """``"i"`` when ``f(0) >= 0``, ``"ii"`` when the obstacle is negative everywhere."""
        gb, g1 = self.gm_b, self.gm_1
        return "i" if -self.K * g1 * gb <= gb - g1 else "ii"


def obstacle(b_star: float, profile: RootProfile) -> ObstacleFn:
    if b_star >= 1.0:
        raise ValueError("no obstacle for b* = 1: reinsurance is never started")
    return ObstacleFn(b_star, profile.gamma_minus(b_star), profile.gamma_minus_1, profile.problem.params.K)


def theta_fn(x, gm_b: float, gm_1: float, gp_1: float):
    """Left-hand side ``Theta(x)`` of the boundary equation (strictly increasing)."""
    x = np.asarray(x, dtype=float)
    out = gp_1 * (gm_b - gm_1) * _exp((gm_b - gp_1) * x) - gm_1 * (gm_b - gp_1) * _exp(
        (gm_b - gm_1) * x
    )
    return out if out.ndim else float(out)


def d_of_K(K: float, gm_b: float, gm_1: float, gp_1: float) -> float:
    """Right-hand side ``D(K)`` of the boundary equation."""
    return gm_b * (gp_1 - gm_1) * math.exp(gm_b * K)


def solve_boundary(b_star: float, profile: RootProfile, xtol: float | None = None) -> float:
    """Unique root of ``Theta(x) = D(K)``, searched on the bracket ``[K, x_hat]``."""
    K = profile.problem.params.K
    if K == 0.0:
        return 0.0
    gb = profile.gamma_minus(b_star)
    g1, gp = profile.gamma_minus_1, profile.gamma_plus_1
    if not gb < g1:
        raise ValueError(f"b*={b_star} is not an interior optimum (gamma {gb} >= {g1})")
    x_hat = gb * K / (gb - g1)
    target = d_of_K(K, gb, g1, gp)
    xtol = 1e-12 * max(1.0, K) if xtol is None else xtol
    res = bisect(
        lambda x: theta_fn(x, gb, g1, gp) - target,
        K,
        x_hat,
        xtol=xtol,
        ftol=1e-12 * abs(target),
        maxiter=400,
    )
    return res.root


@dataclass(frozen=True)
class PolicySolution:
    """Optimal level, trigger and the evaluable value functions.

    ``x_star`` is ``inf`` and ``F`` is identically zero when reinsurance is
    never started (``case == "never_reinsure"``).
    """

    problem: Problem
    level: LevelSolution
    b_star: float
    x_star: float
    gamma_minus_bstar: float
    gamma_minus_1: float
    gamma_plus_1: float
    C1: float
    C2: float
    B: float
    H: float
    case: str
    f: ObstacleFn | None = field(repr=False, default=None)

    @property
    def never_reinsure(self) -> bool:
        return self.case == "never_reinsure"

    def G1(self, x):
        return G_of_gamma(self.gamma_minus_1, x)

    def G_bstar(self, x):
        return G_of_gamma(self.gamma_minus_bstar, x)

    def w(self, x):
        """Stopping value: exponential ansatz below ``x*``, the obstacle at and above."""
        x = np.asarray(x, dtype=float)
        if self.never_reinsure:
            out = np.zeros_like(x)
        else:
            h = self.C1 * _exp(self.gamma_minus_1 * x) + self.C2 * _exp(self.gamma_plus_1 * x)
            out = np.where(x < self.x_star, h, self.f(x))
        return out if out.ndim else float(out)

    def w_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.never_reinsure:
            out = np.zeros_like(x)
        else:
            g1, gp = self.gamma_minus_1, self.gamma_plus_1
            h = self.C1 * g1 * _exp(g1 * x) + self.C2 * gp * _exp(gp * x)
            out = np.where(x < self.x_star, h, self.f.derivative(x))
        return out if out.ndim else float(out)

    def continuation(self, x):
        """The exponential branch ``h(x)``, evaluated everywhere (for smooth-fit checks)."""
        x = np.asarray(x, dtype=float)
        out = self.C1 * _exp(self.gamma_minus_1 * x) + self.C2 * _exp(self.gamma_plus_1 * x)
        return out if out.ndim else float(out)

    def continuation_prime(self, x):
        x = np.asarray(x, dtype=float)
        g1, gp = self.gamma_minus_1, self.gamma_plus_1
        out = self.C1 * g1 * _exp(g1 * x) + self.C2 * gp * _exp(gp * x)
        return out if out.ndim else float(out)

    F = w

    def U(self, x):
        """Minimal expected discounted injections from initial surplus ``x``."""
        return self.G1(x) + self.w(x)

    def to_json(self) -> dict:
        finite = lambda v: None if v is None or not math.isfinite(v) else v  # noqa: E731
        return {
            "b_star": self.b_star,
            "x_star": finite(self.x_star),
            "gamma_minus_bstar": self.gamma_minus_bstar,
            "gamma_minus_1": self.gamma_minus_1,
            "gamma_plus_1": self.gamma_plus_1,
            "C1": self.C1,
            "C2": self.C2,
            "B": self.B,
            "H": self.H,
            "case": self.case,
        }


def assemble(level: LevelSolution, x_star: float, profile: RootProfile) -> PolicySolution:
    """Coefficients of the continuation branch for a solved trigger ``x_star``."""
    problem = profile.problem
    g1, gp = profile.gamma_minus_1, profile.gamma_plus_1
    if not level.interior:
        return PolicySolution(
            problem, level, 1.0, math.inf, g1, g1, gp, 0.0, 0.0, 0.0, math.nan, "never_reinsure"
        )
    gb = level.gamma_star
    # H and B rescaled by e^{-gp x} to stay finite for large triggers
    a = gp * (gb - g1) * math.exp((g1 - gp) * x_star)
    h_scaled = a - g1 * (gb - gp)
    B = a / h_scaled
    H = h_scaled * math.exp(min(gp * x_star, _EXP_CLAMP))
    if not (0.0 < B < 1.0) or not H < 0.0:
        raise CoefficientOutOfRange(f"B={B}, H={H} at x*={x_star}")
    f = ObstacleFn(level.b_star, gb, g1, problem.params.K)
    return PolicySolution(
        problem, level, level.b_star, x_star, gb, g1, gp, B / g1, -B / gp, B, H, f.case, f
    )


def solve_policy(problem: Problem, options: SolveOptions | None = None) -> PolicySolution:
    """Optimal level, trigger and value functions for ``problem``."""
    profile = RootProfile.build(problem)
    level = solve_level(problem, options)
    if not level.interior:
        return assemble(level, math.inf, profile)
    x_star = solve_boundary(level.b_star, profile)
    return assemble(level, x_star, profile)


# --- verification ------------------------------------------------------------


@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    worst: float
    tolerance: float


@dataclass(frozen=True)
class VariationalReport:
    clauses: tuple[Clause, ...]
    never_reinsure: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def __getitem__(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        if self.never_reinsure:
            return ["never reinsure: F = 0, no activation boundary"]
        return [
            f"{c.name:<28s} {'PASS' if c.passed else 'FAIL'}  worst={c.worst:.3e}  tol={c.tolerance:.0e}"
            for c in self.clauses
        ]


def generator_residual(sol: PolicySolution, fn: Callable, dfn: Callable, d2fn: Callable, x):
    """``(L - rho) u`` for the b=1 generator, given ``u`` and its derivatives."""
    p = sol.problem.params
    drift, diff = sol.problem.drift(1.0), sol.problem.diffusion(1.0)
    return 0.5 * diff * d2fn(x) + drift * dfn(x) - p.rho * fn(x)


def obstacle_generator_closed_form(sol: PolicySolution, x):
    """``(L - rho) f`` above ``K``: ``-e^{gb (x-K)} Phi(1, gb) / gb``."""
    from .roots import phi

    gb = sol.gamma_minus_bstar
    return -_exp(gb * (np.asarray(x, dtype=float) - sol.problem.params.K)) * phi(1.0, gb, sol.problem) / gb


def verify_variational(sol: PolicySolution, n: int = 10_000, span: float = 4.0) -> VariationalReport:
    """Grid checks of the variational inequality and the smooth-fit conditions."""
    if sol.never_reinsure:
        return VariationalReport((), never_reinsure=True)
    x_star, f = sol.x_star, sol.f
    scale = max(1.0, abs(f(x_star)))
    clauses = []

    h_star, f_star = sol.continuation(x_star), f(x_star)
    clauses.append(Clause("value matching", abs(h_star - f_star) <= 1e-8 * scale, abs(h_star - f_star), 1e-8))
    dh, df = sol.continuation_prime(x_star), f.derivative(x_star)
    clauses.append(Clause("smooth pasting", abs(dh - df) <= 1e-8 * scale, abs(dh - df), 1e-8))
    w0 = abs(sol.continuation_prime(0.0))
    clauses.append(Clause("neumann w'(0)=0", w0 <= 1e-10, w0, 1e-10))

    xs = np.linspace(0.0, x_star, n)
    gap = float(np.max(sol.w(xs) - f(xs)))
    clauses.append(Clause("w <= f on [0, x*]", gap <= 1e-8, gap, 1e-8))

    # exponential ansatz: (L - rho) h = C1 Phi(1, g1) e^{g1 x} + C2 Phi(1, gp) e^{gp x}
    from .roots import phi

    g1, gp = sol.gamma_minus_1, sol.gamma_plus_1
    res = np.abs(
        sol.C1 * phi(1.0, g1, sol.problem) * _exp(g1 * xs)
        + sol.C2 * phi(1.0, gp, sol.problem) * _exp(gp * xs)
    )
    clauses.append(Clause("(L-rho)w = 0 on (0, x*)", float(res.max()) <= 1e-10, float(res.max()), 1e-10))

    top = span * f.x_hat if f.x_hat > 0 else x_star + 1.0
    xs_up = np.linspace(x_star, max(top, x_star + 1e-9), n + 1)[1:]
    lf = obstacle_generator_closed_form(sol, xs_up)
    worst = max(0.0, float(-lf.min()))
    clauses.append(Clause("(L-rho)f >= 0 on (x*, 4x^]", worst <= 1e-10, worst, 1e-10))
    return VariationalReport(tuple(clauses))
