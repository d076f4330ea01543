import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bondopt.curvespace import (
    Curve,
    DualElement,
    MaturityGrid,
    h_inner,
    h_norm,
    interpolation_weights,
    maturity_derivative,
    pair,
    riesz_functional,
    shift,
)
from bondopt.errors import GridExhausted, GridMismatch, NonAlignedShift

GRID = MaturityGrid.from_horizon(4.0, 1 / 16)
vals = arrays(np.float64, GRID.n_points, elements=st.floats(-5, 5, allow_nan=False))


def test_grid_from_horizon():
    g = MaturityGrid.from_horizon(11.0, 1 / 48)
    assert g.n_points == 529
    assert g.s_max == pytest.approx(11.0)
    assert g.index(2.0) == 96


def test_non_aligned_index_raises():
    with pytest.raises(NonAlignedShift):
        GRID.index(0.01)


def test_constant_curve_norm_is_its_level():
    # f = 0 after removing the tail constant
    assert h_inner(Curve.constant(GRID, 3.0), Curve.constant(GRID, -2.0)) == pytest.approx(-6.0)


def test_inner_product_converges_to_integral():
    # f(S) = sin(pi S / 4) vanishes at s_max: int f^2 + f'^2 = 2 + pi^2/8
    exact = 2.0 + np.pi**2 / 8
    errs = []
    for n in (32, 64, 128):
        g = MaturityGrid.from_horizon(4.0, 4.0 / n)
        c = Curve.from_function(g, lambda s: np.sin(np.pi * s / 4))
        errs.append(abs(h_inner(c, c) - exact))
    assert errs[-1] < 2e-3
    assert errs[0] > errs[1] > errs[2]


@given(vals, vals)
def test_inner_product_symmetric(a, b):
    c1, c2 = Curve(GRID, a), Curve(GRID, b)
    assert h_inner(c1, c2) == pytest.approx(h_inner(c2, c1), rel=1e-12, abs=1e-10)


@given(vals)
def test_norm_nonnegative(a):
    assert h_inner(Curve(GRID, a), Curve(GRID, a)) >= -1e-10


@given(vals, vals)
def test_riesz_functional_represents_inner_product(a, b):
    h, g = Curve(GRID, a), Curve(GRID, b)
    assert riesz_functional(h) @ g.values == pytest.approx(h_inner(h, g), rel=1e-9, abs=1e-8)


@given(vals, vals, st.floats(-3, 3))
def test_pairing_linear(a, b, alpha):
    d = DualElement.dirac(1.0, 2.0) + DualElement.from_riesz([0.5], [Curve(GRID, a)])
    c1, c2 = Curve(GRID, b), Curve.constant(GRID, 1.0)
    lhs = pair(d, c1 * alpha + c2)
    assert lhs == pytest.approx(alpha * pair(d, c1) + pair(d, c2), rel=1e-9, abs=1e-8)
    assert d.weights(GRID) @ (c1 * alpha + c2).values == pytest.approx(lhs, rel=1e-9, abs=1e-8)


def test_dirac_is_evaluation():
    c = Curve.from_function(GRID, np.exp)
    assert pair(DualElement.dirac(1.5), c) == pytest.approx(np.exp(1.5))
    w = interpolation_weights(GRID, 1.0 + GRID.delta_s / 4)
    assert w.sum() == pytest.approx(1.0)
    assert np.count_nonzero(w) == 2


@given(st.integers(0, 20), st.integers(0, 20))
def test_shift_semigroup(i, j):
    c = Curve.from_function(GRID, lambda s: np.cos(s))
    a, b = i * GRID.delta_s, j * GRID.delta_s
    lhs = shift(shift(c, a), b)
    rhs = shift(c, a + b)
    np.testing.assert_array_equal(lhs.values, rhs.values)


def test_shift_errors():
    c = Curve.constant(GRID, 1.0)
    with pytest.raises(NonAlignedShift):
        shift(c, 0.01)
    with pytest.raises(GridExhausted):
        shift(c, 3.0, support=2.0)


def test_grid_mismatch():
    other = MaturityGrid.from_horizon(4.0, 1 / 8)
    with pytest.raises(GridMismatch):
        h_inner(Curve.constant(GRID, 1.0), Curve.constant(other, 1.0))


def test_derivative_exact_on_linear():
    c = Curve.from_function(GRID, lambda s: 3 * s - 1)
    np.testing.assert_allclose(maturity_derivative(c).values, 3.0, rtol=1e-12)


def test_norm_of_scaled_curve():
    c = Curve.from_function(GRID, lambda s: np.exp(-s))
    assert h_norm(c * -2.5) == pytest.approx(2.5 * h_norm(c))
