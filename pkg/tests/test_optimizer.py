import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bondopt.curvespace import pair
from bondopt.errors import DomainViolation, StepTooLarge, UnsupportedKind, ValidationError
from bondopt.market import simulate_batch, simulate_exact
from bondopt.measure import RiskBudget, lognormal_expect, xi_path
from bondopt.optimizer import (
    clark_ocone_check,
    closed_form_b,
    closed_form_lambda,
    closed_form_wealth,
    custom_utility,
    exponential_utility,
    feedback_ratio,
    gamma_solve,
    hedge_plan,
    hjb_residual,
    lambda_monotone,
    log_utility,
    make_plan,
    make_utility,
    mutual_fund_decompose,
    optimal_terminal_wealth,
    optimality_stress,
    power_utility,
    quadratic_utility,
    reference_plan,
    solve_lambda,
    wealth_process,
)
from bondopt.portfolio import accumulate_gains

UTILS = [(quadratic_utility(2.0), 1.0), (exponential_utility(1.0), 1.0), (power_utility(0.5), 1.0),
         (log_utility(), 1.0)]


def test_utility_parameter_ranges():
    with pytest.raises(ValidationError):
        power_utility(1.5)
    with pytest.raises(ValidationError):
        exponential_utility(-1.0)
    with pytest.raises(UnsupportedKind):
        make_utility("cubic", 1.0)


@pytest.mark.parametrize("u,K0", UTILS, ids=lambda x: getattr(x, "kind", ""))
def test_phi_inverts_marginal(u, K0):
    # u'(phi(y)) = y, checked with a central difference of u
    y = np.array([0.3, 0.8, 1.4])
    x = u.phi(y)
    h = 1e-6
    np.testing.assert_allclose((u.u(x + h) - u.u(x - h)) / (2 * h), y, rtol=1e-6)


@given(st.sampled_from(UTILS[:3] + [(power_utility(0.85), 1.0)]), st.floats(0.0, 0.5), st.floats(0.2, 1.5))
def test_generic_lambda_matches_closed_form(uk, c, K0):
    u, _ = uk
    if u.kind == "quadratic":
        K0 = min(K0, 1.9)
    lam = solve_lambda(u, K0, c)
    ref = closed_form_lambda(u, K0, c)
    assert lam == pytest.approx(ref, rel=1e-8)


def test_budget_monotone():
    assert lambda_monotone(power_utility(0.5), 0.2, np.linspace(0.1, 3, 20))


def test_k0_below_floor_rejected():
    with pytest.raises(ValidationError):
        solve_lambda(power_utility(0.5), 0.0, 0.1)


def test_custom_utility_reproduces_power():
    mu = 0.5
    cu = custom_utility(lambda y: (y / mu) ** (1 / (mu - 1)), lambda y: (y / mu) ** (1 / (mu - 1)) / ((mu - 1) * y),
                        domain="positive", x_floor=0.0)
    assert solve_lambda(cu, 1.0, 0.1) == pytest.approx(closed_form_lambda(power_utility(mu), 1.0, 0.1), rel=1e-8)


@pytest.mark.parametrize("u,K0", UTILS, ids=lambda x: getattr(x, "kind", ""))
def test_wealth_matches_closed_form(u, K0, small_model):
    model, tg = small_model
    plan = make_plan(u, K0, model, tg)
    b = simulate_batch(model, tg, 30, 8)
    dens = xi_path(model.gamma_table(tg)[:-1], b.dW, tg.delta_t)
    Y = wealth_process(plan, dens)
    ref = closed_form_wealth(u, K0, dens.mq, dens.c)
    np.testing.assert_allclose(Y, ref, rtol=1e-8)
    np.testing.assert_allclose(plan.b(None, dens.xi), closed_form_b(u, ref), rtol=1e-8, atol=1e-12)
    assert Y[0, 0] == pytest.approx(K0, rel=1e-10)
    np.testing.assert_allclose(Y[:, -1], optimal_terminal_wealth(plan, dens.xi[:, -1]), rtol=1e-12)


def test_gamma_solve_hits_market_price_of_risk(small_model):
    model, tg = small_model
    sig = model.sigma_table(tg)
    for k in (0, 5, 12):
        stp = gamma_solve(model, tg, k)
        for i in range(model.d):
            got = stp.ell @ (sig[k, i, : stp.shifted_p0.grid.n_points] * stp.shifted_p0.values)
            assert got == pytest.approx(model.gamma_table(tg)[k, i], rel=1e-10)


@pytest.mark.parametrize("kind", ["quadratic", "power"])
def test_hedge_value_and_loadings(kind, small_model):
    model, tg = small_model
    u = dict(quadratic=quadratic_utility(2.0), power=power_utility(0.5))[kind]
    plan = make_plan(u, 1.0, model, tg)
    path = simulate_exact(model, tg, (3, 1))
    st_ = hedge_plan(plan, model, path)
    led = accumulate_gains(st_, path)
    np.testing.assert_allclose(led.vbar, st_.extras["Y"], rtol=1e-10)
    expect = st_.extras["b"][:, None] * model.gamma_table(tg)
    np.testing.assert_allclose(led.loadings, expect, rtol=1e-8, atol=1e-14)
    for k in (0, 6):
        assert pair(st_.theta[k], path.curve(k)) == pytest.approx(led.vbar[k], rel=1e-10)


def test_exponential_hedge_replicates_exactly(small_model):
    model, tg = small_model
    plan = make_plan(exponential_utility(1.0), 1.0, model, tg)
    b = simulate_batch(model, tg, 20, 4)
    led = accumulate_gains(hedge_plan(plan, model, b), b)
    np.testing.assert_allclose(1.0 + led.gbar, hedge_plan(plan, model, b).extras["Y"], atol=1e-12)


@pytest.mark.parametrize("u,K0", UTILS, ids=lambda x: getattr(x, "kind", ""))
def test_hjb_residual_small(u, K0):
    risk = RiskBudget.constant([0.2, 0.1], 1.0, 1 / 48)
    t, w = np.meshgrid(np.linspace(0.05, 0.95, 10), np.linspace(0.5, 1.5, 10))
    assert np.max(hjb_residual(u, risk, t, w)) <= 1e-4


def test_hjb_step_too_large():
    risk = RiskBudget.constant([0.5], 1.0, 1 / 48)
    with pytest.raises(StepTooLarge):
        hjb_residual(quadratic_utility(2.0), risk, 0.5, 1.0, h_t=1e-3, h_w=0.3, tol=1e-12)


def test_feedback_ratio_equals_b():
    u = power_utility(0.5)
    risk = RiskBudget.constant([0.3], 1.0, 1 / 48)
    assert feedback_ratio(u, risk, 0.4, 1.2) == pytest.approx(closed_form_b(u, 1.2), rel=1e-6)


def test_mutual_fund(small_model):
    model, tg = small_model
    plan = make_plan(quadratic_utility(2.0), 1.0, model, tg)
    path = simulate_exact(model, tg, 2)
    fd = mutual_fund_decompose(plan, reference_plan(model, tg), path)
    own = hedge_plan(plan, model, path)
    np.testing.assert_allclose(fd.reconstructed.weights, own.weights, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValidationError):
        mutual_fund_decompose(plan, plan, path)


def test_clark_ocone_linear_exact():
    risk = RiskBudget.constant([0.3, 0.2], 1.0, 1 / 12)
    dW = np.random.default_rng(0).normal(0, math.sqrt(1 / 12), (200, 12, 2))
    rms, _ = clark_ocone_check(lambda m: m, lambda m: np.ones_like(m), risk, dW)
    assert rms < 1e-13


def test_optimality_stress_passes(small_model):
    model, tg = small_model
    for u, K0 in UTILS[:3]:
        res = optimality_stress(make_plan(u, K0, model, tg), n_payoffs=6)
        assert all(r.passed for r in res)


def test_terminal_mode(small_model):
    model, tg = small_model
    b = simulate_batch(model, tg, 500, 3)
    samples = b.xi[:, -1] * b.pbar[:, -1, 0]
    plan = make_plan(power_utility(0.5), 1.0, model, tg, "terminal", samples=samples)
    X = optimal_terminal_wealth(plan, b.xi[:, -1], b.pbar[:, -1, 0])
    assert np.mean(samples * X) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(UnsupportedKind):
        hedge_plan(plan, model, b)
    with pytest.raises(ValidationError):
        make_plan(power_utility(0.5), 1.0, model, tg, "terminal")
    with pytest.raises(DomainViolation):
        optimal_terminal_wealth(plan, np.array([-1.0]), np.array([1.0]))


def test_budget_identity_quadrature(small_model):
    model, tg = small_model
    u = exponential_utility(2.0)
    plan = make_plan(u, 0.3, model, tg)
    got = lognormal_expect(lambda x: x * u.phi(plan.lam * x), plan.risk.total)
    assert got == pytest.approx(0.3, rel=1e-10)
