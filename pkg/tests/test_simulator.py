import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinsurance_timing.boundary import G, solve_policy
from reinsurance_timing.model import benchmark
from reinsurance_timing.simulator import (
    Regime,
    Scenario,
    SimConfig,
    SimConfigError,
    _advance_plain,
    _rng,
    default_horizon,
    dump_traces,
    estimate_all,
    g_scenario,
    optimality_probe,
    policy_scenario,
    run_scenarios,
    simulate_G,
    simulate_policy,
    simulate_totals,
    tail_bound,
)

PROP = benchmark("proportional")
SMALL = SimConfig(dt=5e-3, paths=2000, seed=11)


@pytest.fixture(scope="module")
def prop_solution():
    return solve_policy(PROP)


# --- configuration -------------------------------------------------------------------


def test_default_horizon():
    assert default_horizon(0.04) == 231.0
    assert math.exp(-0.04 * default_horizon(0.04)) <= 1e-4


@pytest.mark.parametrize(
    "kwargs",
    [dict(dt=0.0), dict(dt=-1e-3), dict(horizon=1e-3, dt=1e-3), dict(paths=99), dict(seed=-1), dict(seed=2**64)],
)
def test_config_invariants(kwargs):
    with pytest.raises(SimConfigError):
        SimConfig(**kwargs)


def test_config_streams():
    assert SimConfig(paths=1000).streams == 500
    assert SimConfig(paths=1000, antithetic=False).streams == 1000
    assert SimConfig(dt=1e-3).steps_for(0.04) == 231_000


def test_tail_bound_formula():
    r = Regime(-0.1, 10.0)
    want = math.exp(-0.04 * 100) * (0.1 / 0.04 + math.sqrt(10.0) / math.sqrt(0.08))
    assert tail_bound([r], 0.04, 100.0) == pytest.approx(want, rel=1e-15)
    assert tail_bound([Regime(0.5, 0.0)], 0.04, 100.0) == 0.0


def test_rejects_negative_inputs():
    with pytest.raises(ValueError):
        g_scenario(1.0, -1.0, PROP)
    with pytest.raises(ValueError):
        policy_scenario(0.0, 0.1, -1.0, PROP)
    with pytest.raises(ValueError):
        policy_scenario(-1.0, 0.1, 5.0, PROP)


# --- deterministic oracles --------------------------------------------------------------


@pytest.mark.parametrize("y", [0.0, 1.0, 4.0])
def test_zero_diffusion_closed_form(y):
    """b=0: deterministic path with drift -lambda(theta-eta)mu; cost e^{-rho y/a} a/rho."""
    a = 0.05 * 0.2 * 10.0
    want = math.exp(-0.04 * y / a) * a / 0.04
    for extrapolate in (False, True):
        cfg = SimConfig(dt=1e-3, paths=100, seed=1, extrapolate=extrapolate)
        est = simulate_G(0.0, y, PROP, cfg)
        assert est.std_error <= 1e-12
        # step-end discounting and grid hitting give an O(dt) relative error
        assert abs(est.mean - want) <= est.discount_tail_bound + 5 * 0.04 * 1e-3 * want


def test_shortfall_at_switch_is_injected():
    """Switching below K injects the shortfall at the switch time."""
    pre = Regime(1.0, 0.0)
    post = Regime(1.0, 0.0)
    sc = Scenario(0.0, pre, switch_at=2.0, K=5.0, post=post)
    cfg = SimConfig(dt=1e-3, horizon=50.0, paths=100, extrapolate=False)
    est = estimate_all([sc], 0.04, cfg)[0]
    # the surplus crosses 2 at the end of step 2000 or, after rounding, one step later
    dt = cfg.dt
    lo = (3.0 - dt) * math.exp(-0.04 * (2.0 + dt))
    hi = 3.0 * math.exp(-0.04 * 2.0)
    assert lo - 1e-12 <= est.mean <= hi + 1e-12


def test_immediate_switch_at_start():
    sc = Scenario(12.0, Regime(0.0, 0.0), switch_at=10.0, K=15.0, post=Regime(1.0, 0.0))
    cfg = SimConfig(dt=1e-3, horizon=5.0, paths=100, extrapolate=False)
    assert estimate_all([sc], 0.04, cfg)[0].mean == pytest.approx(3.0, rel=1e-15)


# --- reproducibility -----------------------------------------------------------------


def test_bit_identical_across_worker_counts():
    scen = [g_scenario(1.0, 0.0, PROP), policy_scenario(0.0, 0.06, 12.0, PROP)]
    base = SimConfig(dt=1e-2, horizon=30.0, paths=600, seed=5, workers=1)
    a = run_scenarios(scen, 0.04, base)
    b = run_scenarios(scen, 0.04, SimConfig(dt=1e-2, horizon=30.0, paths=600, seed=5, workers=3))
    c = run_scenarios(scen, 0.04, base)
    assert np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_bundle_columns_independent_of_neighbours():
    """A scenario's totals do not depend on which other scenarios share the bundle."""
    cfg = SimConfig(dt=1e-2, horizon=30.0, paths=300, seed=2)
    one = run_scenarios([g_scenario(1.0, 3.0, PROP)], 0.04, cfg)
    two = run_scenarios([g_scenario(0.5, 0.0, PROP), g_scenario(1.0, 3.0, PROP)], 0.04, cfg)
    assert np.array_equal(one[:, 0], two[:, 1])


def test_seed_changes_paths():
    cfg = SimConfig(dt=1e-2, horizon=30.0, paths=300, seed=2)
    a = run_scenarios([g_scenario(1.0, 0.0, PROP)], 0.04, cfg)
    b = run_scenarios([g_scenario(1.0, 0.0, PROP)], 0.04, SimConfig(dt=1e-2, horizon=30.0, paths=300, seed=3))
    assert not np.array_equal(a, b)


def test_streams_are_counter_based():
    z1 = _rng(7, 3).standard_normal(5)
    _rng(7, 2).standard_normal(100)
    z2 = _rng(7, 3).standard_normal(5)
    assert np.array_equal(z1, z2)
    assert not np.array_equal(z1, _rng(7, 4).standard_normal(5))
    assert not np.array_equal(z1, _rng(8, 3).standard_normal(5))


# --- reflection ----------------------------------------------------------------------


def test_trace_reflection_invariants(tmp_path, prop_solution):
    sc = policy_scenario(0.0, prop_solution.b_star, prop_solution.x_star, PROP)
    cfg = SimConfig(dt=1e-2, horizon=60.0, paths=100, seed=4)
    path = dump_traces(sc, 0.04, cfg, tmp_path / "t.csv", n_paths=6)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"path", "t", "X", "I", "regime"}
    by_path = {}
    for r in rows:
        by_path.setdefault(int(r["path"]), []).append(r)
    assert sorted(by_path) == list(range(6))
    switched = 0
    for rs in by_path.values():
        x = np.array([float(r["X"]) for r in rs])
        i = np.array([float(r["I"]) for r in rs])
        reg = np.array([int(r["regime"]) for r in rs])
        assert np.all(x >= 0.0)
        dI = np.diff(i)
        assert np.all(dI >= 0.0)
        assert np.all(x[1:][dI > 0] == 0.0)  # injections only where the state is pushed to 0
        assert np.all(np.diff(reg) >= 0)  # irreversible
        switched += reg[-1]
    assert switched > 0


def test_trace_cap(tmp_path):
    sc = g_scenario(1.0, 0.0, PROP)
    cfg = SimConfig(dt=0.1, horizon=5.0, paths=1000, seed=1)
    path = dump_traces(sc, 0.04, cfg, tmp_path / "t.csv", n_paths=500, stride=10)
    with open(path, newline="") as fh:
        ids = {int(r["path"]) for r in csv.DictReader(fh)}
    assert len(ids) == 100


def test_trace_matches_kernel_total(tmp_path):
    """The trace's final cumulative injection equals the kernel's undiscounted sum (rho -> 0)."""
    sc = g_scenario(1.0, 0.5, PROP)
    cfg = SimConfig(dt=1e-2, horizon=20.0, paths=100, seed=9, antithetic=False)
    path = dump_traces(sc, 1e-12, cfg, tmp_path / "t.csv", n_paths=1)
    with open(path, newline="") as fh:
        last = list(csv.DictReader(fh))[-1]
    z = _rng(9, 0).standard_normal(cfg.steps_for(1e-12))
    x = np.array([0.5])
    tot = np.zeros(1)
    _advance_plain(z, 1.0, 1.0, x, np.array([PROP.drift(1.0) * 1e-2]), np.array([math.sqrt(PROP.diffusion(1.0) * 1e-2)]), tot)
    assert float(last["I"]) == pytest.approx(tot[0], rel=1e-12)
    assert float(last["X"]) == pytest.approx(x[0], rel=1e-12)


# --- statistical oracles (small) ------------------------------------------------------


def test_G_agreement_small(prop_solution):
    scen, targets = [], []
    for b in (0.25, 1.0):
        for y in (0.0, 5.0):
            scen.append(g_scenario(b, y, PROP))
            targets.append(float(G(b, y, PROP)))
    for x0 in (0.0, 5.0, prop_solution.x_star + 1.0):
        scen.append(policy_scenario(x0, prop_solution.b_star, prop_solution.x_star, PROP))
        targets.append(float(prop_solution.U(x0)))
    for est, target in zip(estimate_all(scen, 0.04, SMALL), targets):
        assert est.agrees(target), (est, target)
        assert est.paths_used == 2000


def test_extrapolation_raises_the_projected_euler_estimate():
    est = simulate_G(1.0, 0.0, PROP, SimConfig(dt=1e-2, paths=400, seed=3))
    assert est.mean > est.euler_mean  # the projection under-counts injections


def test_large_surplus_costs_nothing():
    y = 50 * math.sqrt(PROP.diffusion(1.0)) / math.sqrt(0.04)
    est = simulate_G(1.0, y, PROP, SimConfig(dt=1e-2, paths=200, seed=1))
    assert abs(est.mean) <= est.error_budget(3.0)
    assert est.mean == 0.0


def test_never_reinsure_policy_is_G1():
    cfg = SimConfig(dt=1e-2, paths=400, seed=6)
    a = simulate_policy(3.0, 0.1, math.inf, PROP, cfg)
    b = simulate_G(1.0, 3.0, PROP, cfg)
    assert a.mean == b.mean and a.std_error == b.std_error
    assert a.agrees(float(G(1.0, 3.0, PROP)))


def test_immediate_policy_is_G_bstar(prop_solution):
    x0 = prop_solution.x_star + 3.0
    cfg = SimConfig(dt=1e-2, paths=400, seed=6)
    a = simulate_policy(x0, prop_solution.b_star, prop_solution.x_star, PROP, cfg)
    b = simulate_G(prop_solution.b_star, x0 - 10.0, PROP, cfg)
    assert a.mean == pytest.approx(b.mean, rel=1e-12)
    assert a.agrees(float(G(prop_solution.b_star, x0 - 10.0, PROP)))


def test_probe_zero_perturbation_is_exactly_zero(prop_solution):
    rows = optimality_probe(
        0.0, prop_solution.b_star, prop_solution.x_star, PROP, SimConfig(dt=1e-2, paths=200, seed=8), [(0.0, 0.0), (0.1, 0.0), (0.0, 5.0)]
    )
    assert rows[0].diff_mean == 0.0 and rows[0].diff_se == 0.0
    assert all(r.nonnegative for r in rows)


def test_probe_clamps_to_domain(prop_solution):
    rows = optimality_probe(
        0.0, prop_solution.b_star, prop_solution.x_star, PROP, SimConfig(dt=1e-2, horizon=20.0, paths=100, seed=8), [(-1.0, -100.0), (2.0, 0.0)]
    )
    assert rows[0].b == 0.0 and rows[0].x == 0.0
    assert rows[1].b == 1.0


def coupled_richardson(y, h, n_streams, horizon, seed=0):
    """Extrapolated estimates at steps h and 2h, driven by one Brownian path per stream."""
    a, s = PROP.drift(1.0), math.sqrt(PROP.diffusion(1.0))
    n = int(round(horizon / h))
    n -= n % 8
    out = np.zeros((n_streams, 2))
    for k in range(n_streams):
        z = _rng(seed, k).standard_normal(n)
        totals = {}
        for m in (1, 2, 4, 8):
            zm = z.reshape(-1, m).sum(axis=1) / math.sqrt(m)
            dt = m * h
            tot = np.zeros(2)
            _advance_plain(zm, math.exp(-0.04 * dt), 1.0, np.full(2, y), np.full(2, a * dt), np.array([s, -s]) * math.sqrt(dt), tot)
            totals[m] = tot.mean()
        out[k] = (2 * totals[1] - totals[4], 2 * totals[2] - totals[8])
    return out


def test_halving_dt_changes_G1_by_less_than_two_se():
    est = coupled_richardson(0.0, 5e-4, 400, 100.0, seed=12)
    fine, coarse = est[:, 0], est[:, 1]
    se = coarse.std(ddof=1) / math.sqrt(len(coarse))
    assert abs(fine.mean() - coarse.mean()) < 2 * se


def test_simulate_totals_shapes():
    cfg = SimConfig(dt=1e-2, horizon=10.0, paths=200)
    fine, coarse = simulate_totals([g_scenario(1.0, 0.0, PROP)] * 3, 0.04, cfg)
    assert fine.shape == coarse.shape == (100, 3)
    fine, coarse = simulate_totals([g_scenario(1.0, 0.0, PROP)], 0.04, SimConfig(dt=1e-2, horizon=10.0, paths=200, extrapolate=False))
    assert coarse is None


@settings(max_examples=20, deadline=None)
@given(y=st.floats(0.0, 10.0), b=st.floats(0.0, 1.0), seed=st.integers(0, 2**32))
def test_totals_nonnegative_and_monotone_in_start(y, b, seed):
    """Per path, a higher start never needs more injections (same noise, same level)."""
    cfg = SimConfig(dt=2e-2, horizon=20.0, paths=100, seed=seed, extrapolate=False)
    tot = run_scenarios([g_scenario(b, y, PROP), g_scenario(b, y + 1.0, PROP)], 0.04, cfg)
    assert np.all(tot >= 0.0)
    assert np.all(tot[:, 1] <= tot[:, 0] + 1e-12)
