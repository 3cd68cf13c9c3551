"""Monte Carlo for the reflected surplus and its discounted capital injections.

Euler steps with projection onto ``[0, inf)``: whatever the step would push
below zero is injected and discounted at the end of the step. The projection
misses the excursions below zero inside a step, which biases the injection
cost down by an amount of order ``sqrt(dt)``. By default the same Brownian path
is also run on a grid four times coarser and the two totals are combined as
``2*fine - coarse``, which cancels that leading term. Each Gaussian
stream (one per path, or per antithetic pair) comes from a Philox generator
keyed by ``(seed, stream index)``, so a path is the same whatever the thread
schedule, and every scenario in a bundle is driven by the same streams.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np

from .model import Problem

_CHUNK = 1 << 15
_BLOCK = 128
# coarse grid factor for the extrapolation; sqrt(4) = 2 gives weights (2, -1)
_COARSE = 4


class SimConfigError(ValueError):
    pass


def default_horizon(rho: float) -> float:
    """Horizon with ``exp(-rho T) <= 1e-4``."""
    return float(math.ceil(math.log(1e4) / rho))


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float | None = None  # None: default_horizon(rho)
    paths: int = 100_000
    seed: int = 0
    antithetic: bool = True
    workers: int | None = None
    extrapolate: bool = True  # cancel the O(sqrt(dt)) projection bias

    def __post_init__(self):
        if not self.dt > 0:
            raise SimConfigError(f"dt must be > 0, got {self.dt}")
        if self.horizon is not None and not self.horizon >= 10 * self.dt:
            raise SimConfigError(f"horizon {self.horizon} is shorter than 10 steps")
        if self.paths < 100:
            raise SimConfigError(f"need at least 100 paths, got {self.paths}")
        if not 0 <= self.seed < 2**64:
            raise SimConfigError("seed must be a 64-bit unsigned integer")

    def horizon_for(self, rho: float) -> float:
        return default_horizon(rho) if self.horizon is None else self.horizon

    def steps_for(self, rho: float) -> int:
        return int(round(self.horizon_for(rho) / self.dt))

    @property
    def streams(self) -> int:
        return self.paths // 2 if self.antithetic else self.paths


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    paths_used: int
    discount_tail_bound: float
    euler_mean: float | None = None  # plain projected-Euler estimate on the fine grid

    def error_budget(self, k: float = 3.0) -> float:
        return k * self.std_error + self.discount_tail_bound

    def agrees(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= self.error_budget(k)


@dataclass(frozen=True)
class Regime:
    """Constant drift and squared volatility of the surplus under one level."""

    drift: float
    diffusion: float

    @classmethod
    def of(cls, problem: Problem, b: float) -> "Regime":
        return cls(problem.drift(b), problem.diffusion(b))


@dataclass(frozen=True)
class Scenario:
    """Start at ``x0`` under ``pre``; on first reaching ``switch_at`` pay ``K`` and move to ``post``."""

    x0: float
    pre: Regime
    switch_at: float = math.inf
    K: float = 0.0
    post: Regime | None = None

    @property
    def switches(self) -> bool:
        return math.isfinite(self.switch_at)


def tail_bound(regimes, rho: float, horizon: float) -> float:
    """Bound on the expected discounted injections after the horizon.

    From any state ``X_T >= 0`` the extra injections over ``[T, T+u]`` are at most
    the running minimum of the free increment, whose mean is bounded by
    ``d_minus*u + sigma*sqrt(2u/pi)``; integrating against ``rho e^{-rho t}`` gives
    ``e^{-rho T} (d_minus/rho + sigma/sqrt(2 rho))``.
    """
    worst = 0.0
    for r in regimes:
        d_minus = max(-r.drift, 0.0)
        worst = max(worst, d_minus / rho + math.sqrt(r.diffusion) / math.sqrt(2.0 * rho))
    return math.exp(-rho * horizon) * worst


# --- kernels -------------------------------------------------------------------


@nb.njit(nogil=True, fastmath=True, cache=True)
def _advance_plain(z, q, disc, x, a, s, tot):
    S = x.shape[0]
    for k in range(z.shape[0]):
        disc *= q
        zk = z[k]
        for j in range(S):
            v = x[j] + a[j] + s[j] * zk
            inj = max(-v, 0.0)
            tot[j] += inj * disc
            x[j] = v + inj
    return disc


@nb.njit(nogil=True, fastmath=True, cache=True)
def _advance_switch(z, q, disc, x, sw, a1, s1, a2, s2, xs, K, tot):
    S = x.shape[0]
    for k in range(z.shape[0]):
        disc *= q
        zk = z[k]
        for j in range(S):
            w = sw[j]
            a = a2[j] if w > 0.0 else a1[j]
            s = s2[j] if w > 0.0 else s1[j]
            v = x[j] + a + s * zk
            inj = max(-v, 0.0)
            v += inj
            trig = 1.0 if v >= xs[j] else 0.0
            trig -= trig * w
            v -= trig * K[j]
            sw[j] = w + trig
            inj2 = max(-v, 0.0)
            tot[j] += (inj + inj2) * disc
            x[j] = v + inj2
    return disc


@nb.njit(nogil=True, cache=True)
def _trace_one(z, q, x0, sw0, a1, s1, a2, s2, xs, K, t_out, x_out, i_out, r_out):
    # single state, every step recorded; the kernels above do the same arithmetic
    x, w, disc, cum = x0, sw0, 1.0, 0.0
    for k in range(z.shape[0]):
        disc *= q
        a = a2 if w > 0.0 else a1
        s = s2 if w > 0.0 else s1
        v = x + a + s * z[k]
        inj = max(-v, 0.0)
        v += inj
        if w == 0.0 and v >= xs:
            v -= K
            w = 1.0
        inj2 = max(-v, 0.0)
        x = v + inj2
        cum += inj + inj2
        t_out[k] = k + 1
        x_out[k] = x
        i_out[k] = cum
        r_out[k] = w
    return cum


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(stream << 64) | seed))


def _state_arrays(scenarios, idx, dt, signs):
    sq = math.sqrt(dt)
    rows = [(scenarios[i], sg) for sg in signs for i in idx]
    x0 = np.array([sc.x0 for sc, _ in rows], dtype=float)
    a1 = np.array([sc.pre.drift * dt for sc, _ in rows])
    s1 = np.array([sg * math.sqrt(sc.pre.diffusion) * sq for sc, sg in rows])
    post = [sc.post or sc.pre for sc, _ in rows]
    a2 = np.array([p.drift * dt for p in post])
    s2 = np.array([sg * math.sqrt(p.diffusion) * sq for p, (_, sg) in zip(post, rows)])
    xs = np.array([sc.switch_at for sc, _ in rows])
    K = np.array([sc.K for sc, _ in rows])
    return x0, a1, s1, a2, s2, xs, K


def _initial_switch(x0, xs, K):
    """Scenarios starting at or above their trigger reinsure at t=0."""
    sw = (x0 >= xs).astype(float)
    x = x0 - sw * K
    inj0 = np.maximum(-x, 0.0)
    return x + inj0, sw, inj0


def simulate_totals(
    scenarios: list[Scenario], rho: float, config: SimConfig
) -> tuple[np.ndarray, np.ndarray | None]:
    """Fine-grid and coarse-grid discounted injection totals, each ``(streams, len(scenarios))``.

    With antithetic sampling each row is the average over the pair ``(z, -z)``.
    The coarse totals use the same Gaussian stream aggregated over blocks of
    four steps; they are ``None`` when ``config.extrapolate`` is off.
    """
    dt = config.dt
    n_steps = config.steps_for(rho)
    q = math.exp(-rho * dt)
    qc = q**_COARSE
    signs = (1.0, -1.0) if config.antithetic else (1.0,)
    plain = [i for i, sc in enumerate(scenarios) if not sc.switches]
    switch = [i for i, sc in enumerate(scenarios) if sc.switches]
    P = _state_arrays(scenarios, plain, dt, signs)
    W = _state_arrays(scenarios, switch, dt, signs)
    Pc = _state_arrays(scenarios, plain, _COARSE * dt, signs)
    Wc = _state_arrays(scenarios, switch, _COARSE * dt, signs)
    n_streams = config.streams
    ns = len(signs)
    fine = np.zeros((n_streams, len(scenarios)))
    coarse = np.zeros_like(fine) if config.extrapolate else None

    def run(z, q, A, B, xp, tp, xw, sw, tw, disc_p, disc_w):
        if len(plain):
            disc_p = _advance_plain(z, q, disc_p, xp, A[1], A[2], tp)
        if len(switch):
            disc_w = _advance_switch(z, q, disc_w, xw, sw, *B[1:5], B[5], B[6], tw)
        return disc_p, disc_w

    def fresh(A, B):
        xp = A[0].copy()
        xw, sw, tw = _initial_switch(B[0], B[5], B[6])
        return [xp, np.zeros_like(xp), xw, sw, tw, 1.0, 1.0]

    def store(target, stream, st):
        if len(plain):
            target[stream, plain] = st[1].reshape(ns, len(plain)).mean(axis=0)
        if len(switch):
            target[stream, switch] = st[4].reshape(ns, len(switch)).mean(axis=0)

    def work(block_start):
        block_end = min(block_start + _BLOCK, n_streams)
        for stream in range(block_start, block_end):
            gen = _rng(config.seed, stream)
            f = fresh(P, W)
            c = fresh(Pc, Wc) if config.extrapolate else None
            done = 0
            while done < n_steps:
                m = min(_CHUNK, n_steps - done)
                z = gen.standard_normal(m)
                f[5], f[6] = run(z, q, P, W, *f)
                if c is not None:
                    mc = m - m % _COARSE
                    zc = z[:mc].reshape(-1, _COARSE).sum(axis=1) / math.sqrt(_COARSE)
                    c[5], c[6] = run(zc, qc, Pc, Wc, *c)
                done += m
            store(fine, stream, f)
            if c is not None:
                store(coarse, stream, c)

    workers = config.workers or os.cpu_count() or 1
    starts = range(0, n_streams, _BLOCK)
    if workers == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(work, starts))
    return fine, coarse


def combine(fine: np.ndarray, coarse: np.ndarray | None) -> np.ndarray:
    """Per-stream extrapolated totals ``2*fine - coarse`` (``fine`` alone without a coarse run)."""
    if coarse is None:
        return fine
    return 2.0 * fine - coarse


def run_scenarios(scenarios: list[Scenario], rho: float, config: SimConfig) -> np.ndarray:
    """Per-stream discounted injection totals, shape ``(streams, len(scenarios))``."""
    return combine(*simulate_totals(scenarios, rho, config))


def summarize(
    samples: np.ndarray, config: SimConfig, tail: float, euler: np.ndarray | None = None
) -> SimEstimate:
    n = samples.shape[0]
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    used = 2 * n if config.antithetic else n
    euler_mean = float(np.mean(euler)) if euler is not None else mean
    return SimEstimate(mean, se, used, tail, euler_mean)


def _scenario_tail(sc: Scenario, rho: float, config: SimConfig) -> float:
    regimes = [sc.pre] + ([sc.post] if sc.post is not None else [])
    return tail_bound(regimes, rho, config.horizon_for(rho))


def estimate_all(scenarios: list[Scenario], rho: float, config: SimConfig) -> list[SimEstimate]:
    fine, coarse = simulate_totals(scenarios, rho, config)
    totals = combine(fine, coarse)
    return [
        summarize(totals[:, j], config, _scenario_tail(sc, rho, config), fine[:, j])
        for j, sc in enumerate(scenarios)
    ]


# --- public operations ---------------------------------------------------------


def g_scenario(b: float, y: float, problem: Problem) -> Scenario:
    if y < 0:
        raise ValueError("simulation starts from a nonnegative surplus")
    return Scenario(float(y), Regime.of(problem, b))


def policy_scenario(x0: float, b_star: float, x_star: float, problem: Problem) -> Scenario:
    if x_star < 0:
        raise ValueError(f"trigger must be >= 0, got {x_star}")
    if x0 < 0:
        raise ValueError("simulation starts from a nonnegative surplus")
    pre = Regime.of(problem, 1.0)
    if not math.isfinite(x_star):
        return Scenario(float(x0), pre)
    return Scenario(float(x0), pre, float(x_star), problem.params.K, Regime.of(problem, b_star))


def simulate_G(b: float, y: float, problem: Problem, config: SimConfig) -> SimEstimate:
    """Monte Carlo estimate of the injection cost under a fixed level ``b``."""
    return estimate_all([g_scenario(b, y, problem)], problem.params.rho, config)[0]


def simulate_policy(
    x0: float, b_star: float, x_star: float, problem: Problem, config: SimConfig
) -> SimEstimate:
    """Cost of reinsuring at level ``b_star`` when the surplus first reaches ``x_star``.

    ``x_star = inf`` never reinsures. If the surplus is below ``K`` at the
    switch, the shortfall is injected at that instant.
    """
    return estimate_all([policy_scenario(x0, b_star, x_star, problem)], problem.params.rho, config)[0]


@dataclass(frozen=True)
class ProbeRow:
    delta_b: float
    delta_x: float
    b: float
    x: float
    diff_mean: float
    diff_se: float

    @property
    def nonnegative(self) -> bool:
        """Cost increase consistent with optimality (>= -3 SE)."""
        return self.diff_mean >= -3.0 * self.diff_se


def probe_scenarios(x0, b_star, x_star, problem, perturbations):
    base = policy_scenario(x0, b_star, x_star, problem)
    rows, scen = [], [base]
    for db, dx in perturbations:
        b = min(max(b_star + db, 0.0), 1.0)
        x = max(x_star + dx, 0.0)
        rows.append((db, dx, b, x))
        scen.append(policy_scenario(x0, b, x, problem))
    return rows, scen


def probe_table(rows, totals: np.ndarray) -> list[ProbeRow]:
    """Rows from totals whose column 0 is the base policy and column i+1 the i-th perturbation."""
    out = []
    n = totals.shape[0]
    for i, (db, dx, b, x) in enumerate(rows):
        diff = totals[:, i + 1] - totals[:, 0]
        se = float(np.std(diff, ddof=1) / math.sqrt(n)) if np.any(diff) else 0.0
        out.append(ProbeRow(db, dx, b, x, float(np.mean(diff)), se))
    return out


def optimality_probe(
    x0: float,
    b_star: float,
    x_star: float,
    problem: Problem,
    config: SimConfig,
    perturbations,
) -> list[ProbeRow]:
    """Cost difference of perturbed policies against ``(b_star, x_star)`` under common random numbers."""
    rows, scen = probe_scenarios(x0, b_star, x_star, problem, perturbations)
    totals = run_scenarios(scen, problem.params.rho, config)
    return probe_table(rows, totals)


def dump_traces(
    scenario: Scenario,
    rho: float,
    config: SimConfig,
    path: str | Path,
    n_paths: int = 10,
    stride: int = 1,
) -> Path:
    """Debug CSV ``path,t,X,I,regime`` for the first ``n_paths`` paths (at most 100).

    With antithetic sampling paths ``2i`` and ``2i+1`` are the pair of stream ``i``.
    """
    n_paths = min(int(n_paths), 100)
    n_steps = config.steps_for(rho)
    dt = config.dt
    q = math.exp(-rho * dt)
    signs = (1.0, -1.0) if config.antithetic else (1.0,)
    path = Path(path)
    post = scenario.post or scenario.pre
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["path", "t", "X", "I", "regime"])
        pid = 0
        stream = 0
        while pid < n_paths:
            z = _rng(config.seed, stream).standard_normal(n_steps)
            for sg in signs:
                if pid >= n_paths:
                    break
                x0, sw, inj0 = _initial_switch(
                    np.array([scenario.x0]), np.array([scenario.switch_at]), np.array([scenario.K])
                )
                arrays = [np.empty(n_steps) for _ in range(4)]
                _trace_one(
                    z, q, float(x0[0]), float(sw[0]),
                    scenario.pre.drift * dt, sg * math.sqrt(scenario.pre.diffusion * dt),
                    post.drift * dt, sg * math.sqrt(post.diffusion * dt),
                    scenario.switch_at, scenario.K, *arrays,
                )
                t, xv, iv, rv = arrays
                wr.writerow([pid, 0.0, repr(float(x0[0])), repr(float(inj0[0])), int(sw[0])])
                for k in range(0, n_steps, stride):
                    wr.writerow([pid, repr(float(t[k] * dt)), repr(float(xv[k])), repr(float(iv[k] + inj0[0])), int(rv[k])])
                pid += 1
            stream += 1
    return path
