"""Problem data: market constants, claim-size laws and retention families.

Everything downstream is driven by the moment pair ``(M1(b), M2(b))`` of the
retained claim ``r(Z, b)``, together with the drift and diffusion they induce
on the surplus diffusion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable


class ModelError(ValueError):
    """Invalid parameters, claim law or retention family."""


def _check_level(b: float) -> float:
    b = float(b)
    if not 0.0 <= b <= 1.0 or math.isnan(b):
        raise ModelError(f"retention level must lie in [0, 1], got {b!r}")
    return b


@dataclass(frozen=True)
class ModelParams:
    """Market and contract constants.

    ``lam`` is the claim arrival rate (``lambda`` in config files), ``eta`` and
    ``theta`` the insurer and reinsurer safety loadings, ``rho`` the discount
    rate and ``K`` the fixed cost paid when the reinsurance contract starts.
    """

    lam: float
    eta: float
    theta: float
    rho: float
    K: float = 0.0

    def __post_init__(self):
        for name in ("lam", "eta", "rho"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.K >= 0:
            raise ModelError(f"K must be >= 0, got {self.K!r}")
        if not self.theta > self.eta:
            raise ModelError(
                f"reinsurer loading theta={self.theta} must exceed eta={self.eta}"
            )


# --- claim laws --------------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ModelError(f"Exponential mean must be > 0, got {self.mu!r}")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def second_moment(self) -> float:
        return 2.0 * self.mu**2

    @property
    def premium_mean(self) -> float:
        return self.mu

    def pdf(self, z: float) -> float:
        return math.exp(-z / self.mu) / self.mu if z >= 0 else 0.0

    @property
    def support_min(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Pareto:
    """Pareto law with scale ``zeta`` (support minimum) and shape ``alpha > 2``.

    ``premium_base`` selects the claim mean used in the premium rates. ``"mean"``
    uses the true mean ``alpha*zeta/(alpha-1)``; ``"scale"`` uses ``zeta``,
    the convention under which the reference Pareto benchmark point is
    reproduced (at alpha = 3).
    """

    zeta: float
    alpha: float
    premium_base: str = "mean"

    def __post_init__(self):
        if not self.zeta > 0:
            raise ModelError(f"Pareto scale must be > 0, got {self.zeta!r}")
        if not self.alpha > 2:
            raise ModelError(
                f"Pareto shape must be > 2 for a finite second moment, got {self.alpha!r}"
            )
        if self.premium_base not in ("mean", "scale"):
            raise ModelError(f"unknown premium_base {self.premium_base!r}")

    @property
    def mean(self) -> float:
        return self.alpha * self.zeta / (self.alpha - 1.0)

    @property
    def second_moment(self) -> float:
        return self.alpha * self.zeta**2 / (self.alpha - 2.0)

    @property
    def premium_mean(self) -> float:
        return self.mean if self.premium_base == "mean" else self.zeta

    def pdf(self, z: float) -> float:
        if z < self.zeta:
            return 0.0
        return self.alpha * self.zeta**self.alpha / z ** (self.alpha + 1.0)

    @property
    def support_min(self) -> float:
        return self.zeta


@dataclass(frozen=True)
class MomentsOnly:
    """A claim law known only through its first two moments."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ModelError(f"first moment must be > 0, got {self.mu!r}")
        if not self.sigma2 > 0:
            raise ModelError(f"second moment must be > 0, got {self.sigma2!r}")
        if self.sigma2 < self.mu**2:
            raise ModelError(
                f"second moment {self.sigma2} is below the squared mean {self.mu**2}"
            )

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def second_moment(self) -> float:
        return self.sigma2

    @property
    def premium_mean(self) -> float:
        return self.mu


ClaimLaw = Exponential | Pareto | MomentsOnly


# --- retention families ------------------------------------------------------


@dataclass(frozen=True)
class Proportional:
    """r(z, b) = b z."""

    name = "proportional"


@dataclass(frozen=True)
class ExcessOfLoss:
    """r(z, b) = min(z, b / (1 - b))."""

    name = "excess_of_loss"


@dataclass(frozen=True)
class Custom:
    """User-supplied moment functions ``m1(b)``, ``m2(b)`` on [0, 1].

    The boundary identities are checked once the claim law is known, i.e. when
    the family is bound into a :class:`Problem`.
    """

    m1: Callable[[float], float]
    m2: Callable[[float], float]
    name = "custom"


RetentionModel = Proportional | ExcessOfLoss | Custom


def _one_minus_one_plus_u_exp(u: float) -> float:
    # 1 - (1 + u) e^{-u}, cancellation-free for small u
    if u < 0.1:
        total, term = 0.0, 1.0
        for n in range(1, 30):
            term *= -u / n
            if n >= 2:
                total += (n - 1) * term
            if abs(term) < 1e-18 * max(total, 1e-300):
                break
        return total
    return 1.0 - (1.0 + u) * math.exp(-u)


def _exponential_xl(mu: float, b: float) -> tuple[float, float]:
    if b == 1.0:
        return mu, 2.0 * mu * mu
    u = b / (1.0 - b) / mu
    if u > 745.0:
        return mu, 2.0 * mu * mu
    return -mu * math.expm1(-u), 2.0 * mu * mu * _one_minus_one_plus_u_exp(u)


def _pareto_xl(zeta: float, alpha: float, b: float) -> tuple[float, float]:
    if b < zeta / (1.0 + zeta):
        cap = b / (1.0 - b)
        return cap, cap * cap
    s = zeta * (1.0 - b) / b
    m1 = zeta / (alpha - 1.0) * (alpha - s ** (alpha - 1.0))
    m2 = zeta**2 / (alpha - 2.0) * (alpha - 2.0 * s ** (alpha - 2.0))
    return m1, m2


def moments(model: RetentionModel, law: ClaimLaw, b: float) -> tuple[float, float]:
    """Return ``(M1(b), M2(b))``, the first two moments of the retained claim."""
    b = _check_level(b)
    if isinstance(model, Proportional):
        return law.mean * b, law.second_moment * b * b
    if isinstance(model, ExcessOfLoss):
        if isinstance(law, Exponential):
            return _exponential_xl(law.mu, b)
        if isinstance(law, Pareto):
            return _pareto_xl(law.zeta, law.alpha, b)
        raise ModelError("excess-of-loss retention needs a claim density, not moments only")
    if isinstance(model, Custom):
        return float(model.m1(b)), float(model.m2(b))
    raise ModelError(f"unknown retention model {model!r}")


# --- problem bundle ----------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """Parameters, claim law and retention family bound together."""

    params: ModelParams
    law: ClaimLaw
    retention: RetentionModel = field(default_factory=Proportional)

    def __post_init__(self):
        if isinstance(self.retention, ExcessOfLoss) and isinstance(self.law, MomentsOnly):
            raise ModelError("excess-of-loss retention needs a claim density, not moments only")
        if isinstance(self.retention, Custom):
            m0 = moments(self.retention, self.law, 0.0)
            m1 = moments(self.retention, self.law, 1.0)
            target = (self.law.mean, self.law.second_moment)
            if max(abs(v) for v in m0) > 1e-12:
                raise ModelError(f"custom family must vanish at b=0, got {m0}")
            for got, want in zip(m1, target):
                if abs(got - want) > 1e-9 * abs(want):
                    raise ModelError(f"custom family at b=1 gives {m1}, expected {target}")

    @property
    def mu(self) -> float:
        return self.law.mean

    @property
    def sigma2(self) -> float:
        return self.law.second_moment

    def moments(self, b: float) -> tuple[float, float]:
        return moments(self.retention, self.law, b)

    def drift_coefficient(self, b: float) -> float:
        """theta*M1(b) - (theta - eta)*mu, the drift divided by lambda."""
        p = self.params
        return p.theta * self.moments(b)[0] - (p.theta - p.eta) * self.law.premium_mean

    def drift(self, b: float) -> float:
        return self.params.lam * self.drift_coefficient(b)

    def diffusion(self, b: float) -> float:
        """Squared volatility lambda*M2(b)."""
        return self.params.lam * self.moments(b)[1]

    def replace(self, **changes: Any) -> "Problem":
        """Return a copy with parameter, law or retention fields overridden.

        Keys are config names (``lambda``, ``eta``, ``theta``, ``rho``, ``K``,
        ``mu``, ``sigma2``, ``zeta``, ``alpha``).
        """
        pchanges, lchanges = {}, {}
        for key, value in changes.items():
            if key in _PARAM_KEYS:
                pchanges[_PARAM_KEYS[key]] = float(value)
            elif key in ("mu", "sigma2", "zeta", "alpha", "premium_base"):
                if not hasattr(self.law, key):
                    raise ModelError(f"claim law {type(self.law).__name__} has no field {key!r}")
                lchanges[key] = value if key == "premium_base" else float(value)
            else:
                raise ModelError(f"unknown parameter {key!r}")
        return Problem(
            replace(self.params, **pchanges),
            replace(self.law, **lchanges),
            self.retention,
        )

    def to_dict(self) -> dict:
        p = self.params
        out: dict[str, Any] = {
            "lambda": p.lam,
            "eta": p.eta,
            "theta": p.theta,
            "rho": p.rho,
            "K": p.K,
        }
        law = self.law
        if isinstance(law, Exponential):
            out["claim_law"] = {"type": "exponential", "mu": law.mu}
        elif isinstance(law, Pareto):
            out["claim_law"] = {"type": "pareto", "zeta": law.zeta, "alpha": law.alpha}
            if law.premium_base != "mean":
                out["claim_law"]["premium_base"] = law.premium_base
        else:
            out["claim_law"] = {"type": "moments", "mu": law.mu, "sigma2": law.sigma2}
        if isinstance(self.retention, Custom):
            out["retention"] = {"type": "custom"}
        else:
            out["retention"] = {"type": self.retention.name}
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


_PARAM_KEYS = {"lambda": "lam", "lam": "lam", "eta": "eta", "theta": "theta", "rho": "rho", "K": "K"}

_LAW_KEYS = {
    "exponential": {"mu"},
    "pareto": {"zeta", "alpha", "premium_base"},
    "moments": {"mu", "sigma2"},
}


def law_from_dict(spec: dict) -> ClaimLaw:
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in _LAW_KEYS:
        raise ModelError(f"unknown claim_law type {kind!r}")
    unknown = set(spec) - _LAW_KEYS[kind]
    if unknown:
        raise ModelError(f"unknown claim_law keys for {kind}: {sorted(unknown)}")
    try:
        if kind == "exponential":
            return Exponential(float(spec["mu"]))
        if kind == "pareto":
            return Pareto(float(spec["zeta"]), float(spec["alpha"]), spec.get("premium_base", "mean"))
        return MomentsOnly(float(spec["mu"]), float(spec["sigma2"]))
    except KeyError as exc:
        raise ModelError(f"claim_law {kind} is missing {exc.args[0]!r}") from None


def retention_from_dict(spec: dict) -> RetentionModel:
    spec = dict(spec)
    kind = spec.pop("type", None)
    if spec:
        raise ModelError(f"unknown retention keys: {sorted(spec)}")
    if kind == "proportional":
        return Proportional()
    if kind in ("excess_of_loss", "excess-of-loss", "xl"):
        return ExcessOfLoss()
    raise ModelError(f"unknown retention type {kind!r} (custom families are Python-only)")


def problem_from_dict(doc: dict) -> Problem:
    """Build a :class:`Problem` from the flat JSON config layout."""
    allowed = {"lambda", "eta", "theta", "rho", "K", "claim_law", "retention"}
    unknown = set(doc) - allowed
    if unknown:
        raise ModelError(f"unknown config keys: {sorted(unknown)}")
    missing = {"lambda", "eta", "theta", "rho", "claim_law"} - set(doc)
    if missing:
        raise ModelError(f"missing config keys: {sorted(missing)}")
    params = ModelParams(
        lam=float(doc["lambda"]),
        eta=float(doc["eta"]),
        theta=float(doc["theta"]),
        rho=float(doc["rho"]),
        K=float(doc.get("K", 0.0)),
    )
    retention = retention_from_dict(doc.get("retention", {"type": "proportional"}))
    return Problem(params, law_from_dict(doc["claim_law"]), retention)


def load_problem(path: str | Path) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))


# The benchmark problems: theta=0.5, eta=0.3, lambda=0.05, rho=0.04, K=10.
BENCHMARK_PARAMS = ModelParams(lam=0.05, eta=0.3, theta=0.5, rho=0.04, K=10.0)


def benchmark(kind: str = "proportional", **overrides: Any) -> Problem:
    """Benchmark problems: ``proportional``, ``xl_exponential``, ``xl_pareto``.

    ``xl_pareto`` defaults to ``alpha=3`` with the scale premium convention;
    pass ``alpha``/``premium_base`` to change.
    """
    if kind == "proportional":
        prob = Problem(BENCHMARK_PARAMS, MomentsOnly(10.0, 200.0), Proportional())
    elif kind == "proportional_exponential":
        prob = Problem(BENCHMARK_PARAMS, Exponential(10.0), Proportional())
    elif kind == "xl_exponential":
        prob = Problem(BENCHMARK_PARAMS, Exponential(10.0), ExcessOfLoss())
    elif kind == "xl_pareto":
        prob = Problem(BENCHMARK_PARAMS, Pareto(10.0, 3.0, "scale"), ExcessOfLoss())
    elif kind == "proportional_pareto":
        prob = Problem(BENCHMARK_PARAMS, Pareto(10.0, 3.0, "scale"), Proportional())
    else:
        raise ModelError(f"unknown benchmark {kind!r}")
    return prob.replace(**overrides) if overrides else prob
