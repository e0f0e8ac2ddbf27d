import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perchazard.driver import DriverSpec
from perchazard.errors import DomainError, PositivityError
from perchazard.hazard import ActivityLaw, HazardModel, MinSizeRule
from perchazard.market import (
    HazardBank,
    LatticeHazard,
    MarketPath,
    MarketState,
    PriceParams,
    crash_probability,
    draw_crash,
    draw_crashes,
    ensemble_final_prices,
    run_simulation,
    step_price,
)
from perchazard.percolation import LatticeSpec


def a2_model(rule=None):
    return HazardModel(ActivityLaw.homogeneous(2.0), rule or MinSizeRule.fixed(1))


def test_draw_crash_extremes():
    rng = np.random.default_rng(0)
    assert not any(draw_crash(0.0, 0.1, rng) for _ in range(1000))
    assert all(draw_crash(10.0, 0.1, rng) for _ in range(1000))
    assert crash_probability(3.0, 0.5) == 1.0
    assert crash_probability(2.0, 0.1, exponential=True) == pytest.approx(1 - math.exp(-0.2))
    with pytest.raises(DomainError):
        draw_crash(-1.0, 0.1, rng)
    with pytest.raises(DomainError):
        draw_crash(1.0, 0.0, rng)


def test_draw_crash_consumes_one_uniform():
    a, b = np.random.default_rng(4), np.random.default_rng(4)
    draw_crash(0.0, 1.0, a)
    draw_crash(5.0, 1.0, a)
    b.random(2)
    assert a.random() == b.random()


def test_draw_crash_frequency():
    rng = np.random.default_rng(1)
    n = 200_000
    hits = draw_crashes(np.full(n, 3.0), 0.01, rng).sum()
    assert abs(hits - 0.03 * n) < 4 * math.sqrt(n * 0.03 * 0.97)


def test_step_price_examples():
    params = PriceParams(kappa=0.2, dt=1e-4)
    s = MarketState(2.0)
    assert step_price(s, 0.0, params, False).price == 2.0
    crashed = step_price(s, 0.0, params, True)
    assert crashed.price == pytest.approx(1.6, rel=1e-15)
    assert crashed.crash_count == 1 and crashed.t == 1e-4
    grown = step_price(s, 10.0, params, False)
    assert grown.price == 2.0 * (1 + 0.2 * 10.0 * 1e-4)


def test_binary_volatility_increment():
    params = PriceParams(kappa=0.2, eta=0.5, dt=0.01)
    rng = np.random.default_rng(3)
    seen = {round(step_price(MarketState(1.0), 0.0, params, False, rng).price, 12) for _ in range(200)}
    assert seen == {round(1 + 0.5 * 0.1, 12), round(1 - 0.5 * 0.1, 12)}


def test_positivity_violation():
    params = PriceParams(kappa=0.5, eta=5.0, dt=0.1, noise="gaussian")
    rng = np.random.default_rng(0)
    with pytest.raises(PositivityError) as info:
        for _ in range(1000):
            step_price(MarketState(1.0), 0.0, params, True, rng)
    assert info.value.multiplier <= 0
    assert info.value.state.price == 1.0


def test_price_params_validation():
    for kw in ({"kappa": 0.0}, {"kappa": 1.0}, {"kappa": 0.2, "eta": -1}, {"kappa": 0.2, "dt": 0},
               {"kappa": 0.2, "noise": "levy"}, {"kappa": 0.2, "initial_price": 0}):
        with pytest.raises(DomainError):
            PriceParams(**kw)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1000.0), st.floats(0.01, 0.9))
def test_one_step_martingale_identity(h, kappa):
    # E[multiplier] = 1 + kappa h dt - kappa q is 1 exactly when q = h dt
    dt = 1e-3
    q = crash_probability(h, dt)
    assert 1 + kappa * h * dt - kappa * q == pytest.approx(1.0, abs=1e-15)


def test_survival_small_ensemble():
    rng = np.random.default_rng(8)
    n, steps, q = 20_000, 1000, 1e-3
    alive = np.ones(n, bool)
    for _ in range(steps):
        alive &= ~draw_crashes(np.full(n, 1.0), q, rng)
    expect = (1 - q) ** steps
    se = math.sqrt(expect * (1 - expect) / n)
    assert abs(alive.mean() - expect) < 3 * se


# ---------------------------------------------------------------------------
# full simulations


def small_run(steps=300, seed=3, mode="reshuffled", eta=0.0, kappa=0.2, r0=1.0):
    model = HazardModel(ActivityLaw.homogeneous(2.0, r0), MinSizeRule.occupied_fraction(0.01))
    driver = DriverSpec.linear(0.45, 2.0, dt=1e-3)
    params = PriceParams(kappa=kappa, eta=eta, dt=1e-3)
    return run_simulation(LatticeSpec(40), model, driver, params, steps, mode, seed)


def test_run_simulation_shape_and_invariants():
    path, events = small_run()
    assert len(path) == 301
    path.validate()
    assert path.crash[0] == 0
    assert len(events) == int(path.crash.sum()) > 0
    for e in events:
        i = int(round(e.t / 1e-3))
        assert path.crash[i] == 1 and e.h == path.h[i] and e.p == path.p[i]
        if i + 1 < len(path):
            # the driver restarts from the reset value on the next step
            assert path.p[i + 1] == pytest.approx(0.45 + 2.0 * 1e-3)


def test_zero_steps_gives_initial_row():
    path, events = small_run(steps=0)
    assert len(path) == 1 and events == []
    assert path.price[0] == 1.0 and path.t[0] == 0.0


def test_run_is_deterministic():
    a, _ = small_run()
    b, _ = small_run()
    for col in MarketPath.COLUMNS:
        assert np.array_equal(getattr(a, col), getattr(b, col))


def test_log_price_is_integral_of_drift_between_crashes():
    path, _ = small_run(steps=400)
    logp = path.log_price
    steps = np.diff(logp)
    drift = np.log1p(0.2 * path.h[1:] * 1e-3)
    ok = path.crash[1:] == 0
    assert np.allclose(steps[ok], drift[ok], rtol=0, atol=1e-13)
    assert np.allclose(steps[~ok], np.log(1 + 0.2 * path.h[1:][~ok] * 1e-3 - 0.2), atol=1e-13)


def test_constant_hazard_gives_log_linear_price():
    model = HazardModel(ActivityLaw.homogeneous(1.0), MinSizeRule.fixed(1))
    driver = DriverSpec.ou(0.5, 1.0, 0.2, dt=1e-3)
    params = PriceParams(kappa=0.2, dt=1e-3)
    path, _ = run_simulation(LatticeSpec(20), model, driver, params, 500, seed=2)
    assert (path.h[1:] == 1.0).all()
    d2 = np.diff(path.log_price, 2)
    between = (path.crash[1:-1] == 0) & (path.crash[2:] == 0)
    assert np.abs(d2[between]).max() < 1e-15


def test_kappa_changes_depth_not_timing():
    a, _ = small_run(kappa=0.2)
    b, _ = small_run(kappa=0.5)
    assert np.array_equal(a.crash, b.crash)
    assert np.array_equal(a.h, b.h)
    assert not np.array_equal(a.price, b.price)


def test_volatility_does_not_perturb_bubble_trajectory():
    a, _ = small_run(eta=0.0)
    b, _ = small_run(eta=0.3)
    assert np.array_equal(a.p, b.p) and np.array_equal(a.crash, b.crash)


def test_incremental_mode_runs_and_resets():
    path, events = small_run(mode="incremental", steps=300)
    path.validate()
    assert path.meta["mode"] == "incremental"


def test_mismatched_dt_rejected():
    with pytest.raises(DomainError):
        run_simulation(LatticeSpec(10), a2_model(), DriverSpec.linear(0.4, 1.0, dt=1.0),
                       PriceParams(kappa=0.2, dt=0.5), 10)


def test_lattice_hazard_empty_lattice_is_zero():
    src = LatticeHazard(LatticeSpec(10), a2_model(), "reshuffled", 0)
    assert src.hazard(0.0) == 0.0
    with pytest.raises(DomainError):
        LatticeHazard(LatticeSpec(10), a2_model(), "frozen", 0)


def test_hazard_bank_sampling():
    bank = HazardBank(LatticeSpec(20), a2_model(), [0.3, 0.4, 0.5], per_node=3, seed=1)
    assert bank.values.shape == (3, 3)
    assert bank.nearest(np.array([0.0, 0.34, 0.36, 0.9])).tolist() == [0, 0, 1, 2]
    rng = np.random.default_rng(0)
    vals = bank.sample(np.array([0.49, 0.51]), rng)
    assert all(v in bank.values[2] for v in vals)


def test_ensemble_martingale_with_exact_hazard():
    model = HazardModel(ActivityLaw.homogeneous(2.0), MinSizeRule.fixed(1))
    driver = DriverSpec.linear(0.4, 1.0, dt=1e-2)
    params = PriceParams(kappa=0.2, dt=1e-2)
    prices, crashes = ensemble_final_prices(model, driver, params, 30, 300, seed=5, lattice=LatticeSpec(10))
    assert crashes.sum() > 0
    se = prices.std(ddof=1) / math.sqrt(prices.size)
    assert abs(prices.mean() - 1.0) < 3 * se
