"""Monte Carlo cross-checks of the analytic solution.

All scenarios of a suite (injection costs ``G_b(y)``, policy values ``U(x0)``
and perturbed policies) are simulated in one bundle, so every check is driven
by the same Gaussian streams and each probe difference uses common random
numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .boundary import G, PolicySolution
from .simulator import (
    Scenario,
    SimConfig,
    SimConfigError,
    SimEstimate,
    _scenario_tail,
    combine,
    g_scenario,
    policy_scenario,
    simulate_totals,
    summarize,
)

DEFAULT_LEVELS = (0.25, 0.5, 1.0)
DEFAULT_SURPLUS = (0.0, 5.0, 20.0)
DEFAULT_PERTURBATIONS = ((0.0, -5.0), (0.0, 5.0), (-0.05, 0.0), (0.05, 0.0))


@dataclass(frozen=True)
class Check:
    """One Monte Carlo comparison.

    ``kind`` is ``"G"`` or ``"U"`` (estimate against an analytic ``target``) or
    ``"probe"`` (cost of a perturbed policy minus the optimal one, which must
    be ``>= -3 SE``).
    """

    label: str
    kind: str
    estimate: float
    std_error: float
    target: float
    budget: float
    passed: bool
    euler: float = math.nan

    @property
    def error(self) -> float:
        return self.estimate - self.target


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    config: SimConfig
    seconds: float = math.nan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = [f"{'check':<44s} {'estimate':>12s} {'SE':>10s} {'target':>12s} {'budget':>10s}  result"]
        for c in self.checks:
            out.append(
                f"{c.label:<44s} {c.estimate:12.6g} {c.std_error:10.3g} {c.target:12.6g} "
                f"{c.budget:10.3g}  {'PASS' if c.passed else 'FAIL'}"
            )
        return out


@dataclass(frozen=True)
class SuiteSpec:
    """What to check for one solved problem."""

    solution: PolicySolution
    name: str = ""
    levels: tuple[float, ...] = DEFAULT_LEVELS
    surplus: tuple[float, ...] = DEFAULT_SURPLUS
    x0s: tuple[float, ...] | None = None  # None: (0, 5, x*+1)
    perturbations: tuple[tuple[float, float], ...] = DEFAULT_PERTURBATIONS
    probe_x0: float = 0.0
    x_star_shift: float = 0.0  # simulate the policy at x* + shift (suboptimality demo)

    def policy_x0s(self) -> tuple[float, ...]:
        if self.x0s is not None:
            return self.x0s
        x_star = self.solution.x_star
        top = x_star + 1.0 if math.isfinite(x_star) else 25.0
        return (0.0, 5.0, top)


class _Bundle:
    """Deduplicated scenario list; identical scenarios share one column."""

    def __init__(self):
        self.scenarios: list[Scenario] = []
        self._index: dict[Scenario, int] = {}

    def add(self, sc: Scenario) -> int:
        if sc not in self._index:
            self._index[sc] = len(self.scenarios)
            self.scenarios.append(sc)
        return self._index[sc]


def validation_suite(specs: list[SuiteSpec], config: SimConfig) -> ValidationReport:
    """Run every check of ``specs`` in a single simulation bundle."""
    import time

    if not specs:
        raise ValueError("nothing to validate")
    rhos = {s.solution.problem.params.rho for s in specs}
    if len(rhos) != 1:
        raise SimConfigError("a bundle must share the discount rate")
    rho = rhos.pop()
    bundle = _Bundle()
    plan = []  # (label, kind, column(s), target)
    for spec in specs:
        sol, problem = spec.solution, spec.solution.problem
        tag = f"{spec.name}: " if spec.name else ""
        for b in spec.levels:
            for y in spec.surplus:
                col = bundle.add(g_scenario(b, y, problem))
                plan.append((f"{tag}G_{b:g}({y:g})", "G", col, float(G(b, y, problem))))
        x_sim = sol.x_star + spec.x_star_shift
        for x0 in spec.policy_x0s():
            col = bundle.add(policy_scenario(x0, sol.b_star, x_sim, problem))
            plan.append((f"{tag}U({x0:.6g})", "U", col, float(sol.U(x0))))
        if spec.perturbations and math.isfinite(sol.x_star):
            base = bundle.add(policy_scenario(spec.probe_x0, sol.b_star, x_sim, problem))
            for db, dx in spec.perturbations:
                b = min(max(sol.b_star + db, 0.0), 1.0)
                x = max(x_sim + dx, 0.0)
                col = bundle.add(policy_scenario(spec.probe_x0, b, x, problem))
                plan.append((f"{tag}probe db={db:+g} dx={dx:+g}", "probe", (base, col), 0.0))

    t0 = time.perf_counter()
    fine, coarse = simulate_totals(bundle.scenarios, rho, config)
    seconds = time.perf_counter() - t0
    totals = combine(fine, coarse)

    checks = []
    n = totals.shape[0]
    for label, kind, col, target in plan:
        if kind == "probe":
            base, other = col
            diff = totals[:, other] - totals[:, base]
            se = float(np.std(diff, ddof=1) / math.sqrt(n)) if np.any(diff) else 0.0
            mean = float(np.mean(diff))
            euler = float(np.mean(fine[:, other] - fine[:, base]))
            checks.append(Check(label, kind, mean, se, 0.0, 3.0 * se, mean >= -3.0 * se, euler))
            continue
        sc = bundle.scenarios[col]
        est: SimEstimate = summarize(totals[:, col], config, _scenario_tail(sc, rho, config), fine[:, col])
        budget = est.error_budget(3.0)
        checks.append(
            Check(label, kind, est.mean, est.std_error, target, budget, abs(est.mean - target) <= budget, est.euler_mean)
        )
    return ValidationReport(tuple(checks), config, seconds)


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=seed)
