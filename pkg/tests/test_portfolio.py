import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bondopt.curvespace import Curve, DualElement, h_norm
from bondopt.errors import GridExhausted, ValidationError
from bondopt.market import simulate_batch, simulate_exact
from bondopt.portfolio import (
    StrategyPath,
    accumulate_gains,
    admissibility_diagnostic,
    buy_and_hold,
    fixed_atom,
    money_account,
    probe_dictionary,
    rollover_strategy,
    self_financing_residual,
    terminal_value,
    value,
)


@pytest.fixture(scope="module")
def path(small_model):
    model, tg = small_model
    return simulate_exact(model, tg, (17, 0))


@pytest.fixture(scope="module")
def batch(small_model):
    model, tg = small_model
    return simulate_batch(model, tg, 50, 17)


def test_value_is_pairing(path):
    c = path.curve(0)
    theta = DualElement.dirac(1.0, 2.0) + DualElement.dirac(0.0, -1.0)
    assert value(theta, c) == pytest.approx(2 * c(1.0) - 1.0)


def test_from_duals_matches_weights(path):
    st_ = rollover_strategy(1.0, 1.0, path)
    rebuilt = StrategyPath.from_duals(st_.theta, path.model.grid)
    np.testing.assert_allclose(rebuilt.weights, st_.weights)


def test_ledger_initial_row(path):
    led = accumulate_gains(rollover_strategy(1.0, 3.0, path), path)
    i = path.model.grid.index(1.0)
    assert led.vbar[0] == pytest.approx(3.0 * path.model.p0.values[i])
    assert led.gbar[0] == 0.0
    assert led.rows().shape == (path.tg.n_steps + 1, 3 + path.model.d)


def test_money_account_value_near_one(path):
    led = accumulate_gains(money_account(1.0, path), path)
    np.testing.assert_allclose(led.vbar, 1.0, atol=5e-3)


def test_self_financing_examples_vs_fixed_atom(batch):
    sf = [rollover_strategy(1.0, 1.0, batch), buy_and_hold(2.5, batch), money_account(1.0, batch)]
    res = [np.max(self_financing_residual(s, batch)) for s in sf]
    bad = np.max(self_financing_residual(fixed_atom(1.0, batch), batch))
    assert max(res) < 5e-3
    assert bad > 5 * max(res)


def test_gains_linear_in_strategy(batch):
    a, b = rollover_strategy(1.0, 1.0, batch), buy_and_hold(2.0, batch, 0.5)
    la, lb = accumulate_gains(a, batch), accumulate_gains(b, batch)
    lab = accumulate_gains(a.scaled(2.0) + b, batch)
    np.testing.assert_allclose(lab.gbar, 2 * la.gbar + lb.gbar, atol=1e-14)
    np.testing.assert_allclose(terminal_value(a, batch), la.vbar[:, -1], rtol=1e-14)


def test_strategy_shape_checked(batch, path):
    with pytest.raises(ValidationError):
        accumulate_gains(StrategyPath(np.zeros((3, 3))), path)


def test_buy_and_hold_errors(path):
    with pytest.raises(ValidationError):
        buy_and_hold(0.5, path)
    with pytest.raises(GridExhausted):
        rollover_strategy(3.5, 1.0, path)


def test_probes_unit_norm(small_model):
    model, tg = small_model
    probes = probe_dictionary(model.grid, tg.t_bar)
    assert probes.shape == (200, model.grid.n_points)
    for v in probes[:20]:
        assert h_norm(Curve(model.grid, v)) == pytest.approx(1.0, rel=1e-12)
    assert probe_dictionary(model.grid, tg.t_bar) is probes


def test_admissibility_finite_and_scales(batch):
    s = rollover_strategy(1.0, 1.0, batch)
    a1 = admissibility_diagnostic(s, batch)
    assert np.isfinite(a1) and a1 > 0
    # first two terms are quadratic, the last one too: scaling by 2 multiplies by 4
    assert admissibility_diagnostic(s.scaled(2.0), batch) == pytest.approx(4 * a1, rel=1e-12)


@given(st.floats(0.1, 10.0))
def test_rollover_residual_scales_linearly(x0):
    from bondopt.checks import default_scenario
    sc = default_scenario()
    model, tg = sc.model(1 / 12, 4.0), sc.time_grid(1 / 12)
    p = simulate_exact(model, tg, 5)
    r1 = self_financing_residual(rollover_strategy(1.0, 1.0, p), p)
    assert self_financing_residual(rollover_strategy(1.0, x0, p), p) == pytest.approx(x0 * r1, rel=1e-9, abs=1e-15)
