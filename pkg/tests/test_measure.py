import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bondopt.errors import NonFinite
from bondopt.measure import (
    RiskBudget,
    conditional_Q_expect,
    gaussian_expect,
    lognormal_expect,
    q_shift,
    xi_path,
)
from bondopt.streams import brownian_increments


def test_gaussian_moments_exact():
    assert gaussian_expect(lambda z: z**2) == pytest.approx(1.0, abs=1e-13)
    assert gaussian_expect(lambda z: z**4) == pytest.approx(3.0, abs=1e-12)
    assert gaussian_expect(lambda z: z**3) == pytest.approx(0.0, abs=1e-13)


@given(st.floats(0.0, 1.0), st.floats(-2.0, 3.0))
def test_lognormal_power_moments(c, a):
    # E xi^a = exp(a (a - 1) c / 2)
    got = lognormal_expect(lambda x: x**a, c)
    assert got == pytest.approx(np.exp(a * (a - 1) * c / 2), rel=1e-10)


@given(st.floats(0.01, 3.0), st.floats(0.0, 1.0), st.floats(-2.0, 2.0))
def test_conditional_Q_moments(xi_t, c_rem, a):
    # under Q, xi_T = xi_t exp(N(c/2, c)) so E_Q xi_T^a = xi_t^a exp(a c / 2 + a^2 c / 2)
    got = conditional_Q_expect(lambda x: x**a, xi_t, c_rem)
    assert got == pytest.approx(xi_t**a * np.exp(a * c_rem / 2 + a * a * c_rem / 2), rel=1e-10)


def test_conditional_broadcast_and_zero_remaining():
    out = conditional_Q_expect(np.log, np.array([1.0, 2.0]), np.array([0.0, 0.1]))
    assert out[0] == 0.0
    assert out[1] == pytest.approx(np.log(2.0) + 0.05)


def test_non_finite_integrand_raises():
    with pytest.raises(NonFinite):
        lognormal_expect(lambda x: np.log(x - 1.0), 0.2)


def test_risk_budget_constant():
    rb = RiskBudget.constant([0.2, 0.1], 1.0, 1 / 48)
    np.testing.assert_allclose(rb.c, 0.05 * rb.times, atol=1e-15)
    assert rb.total == pytest.approx(0.05)
    assert rb.remaining(48) == pytest.approx(0.0, abs=1e-15)
    assert rb.at(0.5) == pytest.approx(0.025)


def test_density_mean_one_and_girsanov():
    gamma = np.tile([0.3, -0.2], (12, 1))
    dW = brownian_increments(3, range(20000), 2, 12, 1 / 12)
    dens = xi_path(gamma, dW, 1 / 12)
    xiT = dens.xi[:, -1]
    se = xiT.std(ddof=1) / np.sqrt(len(xiT))
    assert abs(xiT.mean() - 1.0) < 4 * se
    # Q-increments have zero mean under the xi-weighted measure
    dWb = q_shift(gamma, dW, 1 / 12).sum(axis=1)
    w = xiT[:, None] * dWb
    se_w = w.std(axis=0, ddof=1) / np.sqrt(len(w))
    assert np.all(np.abs(w.mean(0)) < 4 * se_w)


def test_mq_identity():
    gamma = np.full((5, 1), 0.4)
    dW = brownian_increments(1, [0], 1, 5, 0.2)[0]
    d = xi_path(gamma, dW, 0.2)
    np.testing.assert_allclose(d.xi, np.exp(d.mq + d.c / 2), rtol=1e-14)
