"""Arbitrage-free zero-coupon market in the moving (time-to-maturity) frame.

Deterministic factor volatilities and a deterministic market price of risk fix
the drift through ``m_t = -sum_i Gamma_t^i sigma_t^i``.  Discounted curves are
propagated on the maturity grid with the time step locked to the maturity step,
so the left translation over one step is an exact drop of the first node.

Two schemes share the same increments:

* ``exact``: stochastic exponential, ``pbar_{k+1} = L_dt(pbar_k * exp((m_k - |sigma_k|^2/2) dt + sigma_k dW_k))``
* ``euler``: splitting with an Euler reaction step, ``pbar_{k+1} = L_dt(pbar_k * (1 + m_k dt + sigma_k dW_k))``

Coefficients are evaluated at the left time endpoint ``t_k``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .curvespace import Curve, MaturityGrid, maturity_derivative
from .errors import (
    FactorCountMismatch,
    GridExhausted,
    NonAlignedShift,
    NonPositiveCurve,
    PositivityLost,
    ValidationError,
)
from .measure import xi_path
from .streams import brownian_increments


# --- volatility and market price of risk ------------------------------------


@dataclass(frozen=True)
class HumpedVolatility:
    """``sigma(t, S) = alpha * S * exp(-beta * S)``."""

    alpha: float
    beta: float

    def __call__(self, t, s):
        s = np.asarray(s, dtype=float)
        return self.alpha * s * np.exp(-self.beta * s)


@dataclass(frozen=True)
class CappedLinearVolatility:
    """``sigma(t, S) = alpha * min(S, s_cap)``."""

    alpha: float
    s_cap: float

    def __call__(self, t, s):
        s = np.asarray(s, dtype=float)
        return self.alpha * np.minimum(s, self.s_cap)


@dataclass(frozen=True)
class PolynomialVolatility:
    """``sigma(t, S) = sum_j coeffs[j] S^j``; admissible only with ``coeffs[0] = 0``."""

    coeffs: tuple

    def __call__(self, t, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), self.coeffs)


class FactorVolatility:
    """Deterministic volatilities ``sigma^i(t, S)``, one callable per factor."""

    def __init__(self, factors: Sequence[Callable], check_times: Sequence[float] = (0.0, 0.5, 1.0, 5.0)):
        self.factors = list(factors)
        if not self.factors:
            raise ValidationError("at least one volatility factor is required", "volatility")
        for i, f in enumerate(self.factors):
            for t in check_times:
                v0 = float(np.asarray(f(t, np.array([0.0])))[0])
                if abs(v0) > 1e-14:
                    raise ValidationError(
                        f"sigma family violates sigma(t,0)=0 (got {v0:g} at t={t:g})", f"volatility[{i}]"
                    )

    @property
    def d(self) -> int:
        return len(self.factors)

    def table(self, times: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        """Array of shape ``(len(times), d, len(nodes))``."""
        out = np.empty((len(times), self.d, len(nodes)))
        for k, t in enumerate(times):
            for i, f in enumerate(self.factors):
                out[k, i] = np.broadcast_to(f(float(t), nodes), nodes.shape)
        if not np.all(np.isfinite(out)):
            raise ValidationError("volatility is not finite on the grid", "volatility")
        return out


class MarketPriceOfRisk:
    """Deterministic ``Gamma^i(t)``; constants or a callable returning ``d`` values."""

    def __init__(self, gamma):
        if callable(gamma):
            self._fn = gamma
            self.d = len(np.atleast_1d(gamma(0.0)))
        else:
            g = np.atleast_1d(np.asarray(gamma, dtype=float))
            self._fn = lambda t, g=g: g
            self.d = len(g)

    def __call__(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._fn(float(t)), dtype=float))

    def table(self, times: np.ndarray) -> np.ndarray:
        return np.array([self(t) for t in times]).reshape(len(times), self.d)


def derive_drift(sigma: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """No-arbitrage drift ``m = -sum_i Gamma^i sigma^i``.

    ``sigma`` has shape ``(..., d, N)`` and ``gamma`` shape ``(..., d)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if sigma.shape[-2] != gamma.shape[-1]:
        raise FactorCountMismatch(f"{sigma.shape[-2]} volatility factors vs {gamma.shape[-1]} risk prices")
    return -np.einsum("...in,...i->...n", sigma, gamma)


# --- initial curves -----------------------------------------------------------


def flat_curve(r0: float) -> Callable:
    return lambda s: np.exp(-r0 * np.asarray(s, dtype=float))


def nelson_siegel_curve(beta0: float, beta1: float, beta2: float, tau: float) -> Callable:
    def p0(s):
        s = np.asarray(s, dtype=float)
        x = s / tau
        with np.errstate(invalid="ignore", divide="ignore"):
            load = np.where(x > 1e-10, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0 - x / 2)
        y = beta0 + beta1 * load + beta2 * (load - np.exp(-x))
        return np.exp(-s * y)

    return p0


def tabulated_curve(maturities: Sequence[float], prices: Sequence[float]) -> Callable:
    """Monotone (PCHIP) interpolation of log prices through the given nodes.

    A node at S=0 with price 1 is implied.  Beyond the last node the last
    log-slope is continued.
    """
    s = np.asarray(maturities, dtype=float)
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0):
        raise ValidationError("tabulated prices must be positive", "initial_curve.prices")
    if s[0] > 0:
        s = np.concatenate([[0.0], s])
        p = np.concatenate([[1.0], p])
    if np.any(np.diff(s) <= 0):
        raise ValidationError("tabulated maturities must be increasing", "initial_curve.maturities")
    interp = PchipInterpolator(s, np.log(p), extrapolate=False)
    slope = float(interp.derivative()(s[-1]))
    last = float(np.log(p[-1]))

    def p0(x):
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, s[0], s[-1])
        lp = np.where(x <= s[-1], interp(inside), last + slope * (x - s[-1]))
        return np.exp(lp)

    return p0


# --- grids and model ----------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    t_bar: float
    delta_t: float

    def __post_init__(self):
        if not (self.t_bar > 0 and self.delta_t > 0):
            raise ValidationError("t_bar and delta_t must be positive", "time")
        k = self.t_bar / self.delta_t
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ValidationError("t_bar must be an integer multiple of delta_t", "time.delta_t")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_bar / self.delta_t))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta_t


@dataclass(eq=False)
class MarketModel:
    """Initial curve, factor volatilities and market price of risk on a maturity grid."""

    grid: MaturityGrid
    p0: Curve
    vol: FactorVolatility
    mpr: MarketPriceOfRisk
    curve_fn: Callable | None = None
    _tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.vol.d != self.mpr.d:
            raise FactorCountMismatch(f"{self.vol.d} volatility factors vs {self.mpr.d} risk prices")
        if abs(self.p0.values[0] - 1.0) > 1e-12:
            raise ValidationError("initial curve must satisfy p0(0) = 1", "initial_curve")
        if not self.p0.is_positive():
            raise ValidationError("initial curve must be strictly positive", "initial_curve")

    @property
    def d(self) -> int:
        return self.vol.d

    def with_step(self, delta: float) -> "MarketModel":
        """Same market on a grid with step ``delta`` and the same horizon."""
        if self.curve_fn is None:
            raise ValueError("regridding needs the model's curve function")
        return build_model(self.curve_fn, self.vol, self.mpr, self.grid.s_max, delta)

    def _check(self, tg: TimeGrid):
        if abs(tg.delta_t - self.grid.delta_s) > 1e-12 * self.grid.delta_s:
            raise NonAlignedShift(f"time step {tg.delta_t} must equal maturity step {self.grid.delta_s}")
        if tg.n_steps >= self.grid.n_points:
            raise GridExhausted(f"horizon {tg.t_bar} consumes the whole maturity grid (s_max={self.grid.s_max})")

    def sigma_table(self, tg: TimeGrid) -> np.ndarray:
        """``sigma^i(t_k, S_n)`` of shape ``(n_steps + 1, d, N)``."""
        self._check(tg)
        key = ("sigma", tg)
        if key not in self._tables:
            self._tables[key] = self.vol.table(tg.times, self.grid.nodes)
        return self._tables[key]

    def gamma_table(self, tg: TimeGrid) -> np.ndarray:
        key = ("gamma", tg)
        if key not in self._tables:
            self._tables[key] = self.mpr.table(tg.times)
        return self._tables[key]

    def drift_table(self, tg: TimeGrid) -> np.ndarray:
        key = ("drift", tg)
        if key not in self._tables:
            self._tables[key] = derive_drift(self.sigma_table(tg), self.gamma_table(tg))
        return self._tables[key]


def build_model(curve_fn: Callable, vol: FactorVolatility, mpr: MarketPriceOfRisk, s_max: float, delta_s: float):
    grid = MaturityGrid.from_horizon(s_max, delta_s)
    p0 = Curve.from_function(grid, curve_fn)
    return MarketModel(grid, p0, vol, mpr, curve_fn=curve_fn)


# --- path records -------------------------------------------------------------


@dataclass(eq=False)
class PathRecord:
    """One simulated path.

    ``pbar[k]`` holds the discounted curve at ``t_k`` on the first ``N - k``
    nodes and NaN on the consumed tail.
    """

    model: MarketModel
    tg: TimeGrid
    dW: np.ndarray
    pbar: np.ndarray
    xi: np.ndarray
    rate_integral: np.ndarray
    scheme: str = "exact"
    positivity_lost: list = field(default_factory=list)

    def curve(self, k: int) -> Curve:
        n_valid = self.model.grid.n_points - k
        return Curve(self.model.grid.truncated(k), self.pbar[k, :n_valid])

    @property
    def n_steps(self) -> int:
        return self.tg.n_steps


@dataclass(eq=False)
class PathBatch:
    """Many paths stacked along a leading axis (same layout as :class:`PathRecord`)."""

    model: MarketModel
    tg: TimeGrid
    dW: np.ndarray
    pbar: np.ndarray
    xi: np.ndarray
    rate_integral: np.ndarray
    paths: np.ndarray
    scheme: str = "exact"
    positivity_lost: list = field(default_factory=list)

    def __len__(self):
        return self.dW.shape[0]

    def __getitem__(self, i: int) -> PathRecord:
        lost = [(k, n) for (p, k, n) in self.positivity_lost if p == i]
        return PathRecord(
            self.model, self.tg, self.dW[i], self.pbar[i], self.xi[i], self.rate_integral[i], self.scheme, lost
        )


def propagate(p0: np.ndarray, sigma: np.ndarray, drift: np.ndarray, dW: np.ndarray, dt: float, scheme: str = "exact"):
    """Propagate discounted curves over ``dW.shape[-2]`` steps.

    ``p0`` has shape ``(N,)``, ``sigma`` ``(n+1, d, N)``, ``drift`` ``(n+1, N)``
    and ``dW`` ``(..., n, d)``.  Returns ``(pbar, lost)`` with ``pbar`` of shape
    ``(..., n+1, N)`` and ``lost`` a list of ``(batch_index, step, node)`` where the
    Euler scheme first produced a non-positive value on a path.
    """
    if scheme not in ("exact", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    batch = dW.shape[:-2]
    n_steps = dW.shape[-2]
    N = p0.shape[-1]
    out = np.full(batch + (n_steps + 1, N), np.nan)
    cur = np.broadcast_to(p0, batch + (N,)).copy()
    out[..., 0, :] = cur
    lost = []
    flagged = np.zeros(batch, dtype=bool)
    half_var = 0.5 * np.sum(sigma**2, axis=-2)
    for k in range(n_steps):
        L = N - k
        noise = np.einsum("...i,in->...n", dW[..., k, :], sigma[k, :, :L])
        if scheme == "exact":
            factor = np.exp((drift[k, :L] - half_var[k, :L]) * dt + noise)
        else:
            factor = 1.0 + drift[k, :L] * dt + noise
        cur = (cur * factor)[..., 1:]
        out[..., k + 1, : L - 1] = cur
        if scheme == "euler":
            bad = np.any(cur <= 0, axis=-1) & ~flagged
            if np.any(bad):
                for idx in zip(*np.nonzero(np.atleast_1d(bad))):
                    row = cur[idx] if batch else cur
                    node = int(np.argmax(row <= 0))
                    lost.append((idx[0] if batch else 0, k + 1, node))
                flagged |= bad
    return out, lost


def _resolve_seed(path_seed):
    if isinstance(path_seed, tuple):
        return int(path_seed[0]), int(path_seed[1])
    return int(path_seed), 0


def _simulate(model, tg, path_seed, scheme, dW):
    base, idx = _resolve_seed(path_seed)
    if dW is None:
        dW = brownian_increments(base, [idx], model.d, tg.n_steps, tg.delta_t)[0]
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (tg.n_steps, model.d):
        raise ValueError(f"increments must have shape {(tg.n_steps, model.d)}, got {dW.shape}")
    sigma, drift, gamma = model.sigma_table(tg), model.drift_table(tg), model.gamma_table(tg)
    pbar, lost = propagate(model.p0.values, sigma, drift, dW, tg.delta_t, scheme)
    lost = [(k, n) for (_, k, n) in lost]
    if lost:
        warnings.warn(f"Euler step produced non-positive discounted price at step {lost[0][0]}", PositivityLost)
    xi = xi_path(gamma[:-1], dW, tg.delta_t).xi
    with np.errstate(invalid="ignore", divide="ignore"):
        rate_int = -np.log(pbar[:, 0])
    return PathRecord(model, tg, dW, pbar, xi, rate_int, scheme, lost)


def simulate_exact(model: MarketModel, tg: TimeGrid, path_seed=0, dW=None) -> PathRecord:
    """Stochastic-exponential solution on the grid.

    ``path_seed`` is a base seed or a ``(base_seed, path_index)`` pair; explicit
    increments ``dW`` of shape ``(n_steps, d)`` override the stream.
    """
    return _simulate(model, tg, path_seed, "exact", dW)


def simulate_euler(model: MarketModel, tg: TimeGrid, path_seed=0, dW=None) -> PathRecord:
    """Exact translation followed by an Euler reaction step; oracle for :func:`simulate_exact`."""
    return _simulate(model, tg, path_seed, "euler", dW)


def simulate_batch(model: MarketModel, tg: TimeGrid, paths, base_seed: int, scheme: str = "exact", dW=None):
    """Simulate the paths with the given indices (or an explicit increment array)."""
    paths = np.arange(paths) if isinstance(paths, (int, np.integer)) else np.asarray(list(paths))
    if dW is None:
        dW = brownian_increments(base_seed, paths, model.d, tg.n_steps, tg.delta_t)
    sigma, drift, gamma = model.sigma_table(tg), model.drift_table(tg), model.gamma_table(tg)
    pbar, lost = propagate(model.p0.values, sigma, drift, dW, tg.delta_t, scheme)
    xi = xi_path(gamma[:-1], dW, tg.delta_t).xi
    with np.errstate(invalid="ignore", divide="ignore"):
        rate_int = -np.log(pbar[..., 0])
    return PathBatch(model, tg, dW, pbar, xi, rate_int, paths, scheme, lost)


def iter_batches(model: MarketModel, tg: TimeGrid, n_paths: int, base_seed: int, chunk: int = 500, scheme="exact"):
    for start in range(0, n_paths, chunk):
        yield simulate_batch(model, tg, range(start, min(start + chunk, n_paths)), base_seed, scheme)


# --- rates, Roll-Overs, boundary condition ------------------------------------


def rates(p: Curve):
    """Short rate and forward curve ``f = -p'/p``."""
    if not p.is_positive():
        raise NonPositiveCurve("forward rates need a strictly positive price curve")
    f = -maturity_derivative(p) / p
    return float(f.values[0]), f


def node_derivative(values: np.ndarray, idx: int, delta: float) -> np.ndarray:
    """Maturity derivative at one node, same stencil as :func:`maturity_derivative`.

    ``values`` holds the valid nodes along the last axis.
    """
    L = values.shape[-1]
    if idx == 0:
        return (values[..., 1] - values[..., 0]) / delta
    if idx == L - 1:
        return (values[..., L - 1] - values[..., L - 2]) / delta
    return (values[..., idx + 1] - values[..., idx - 1]) / (2 * delta)


def forward_history(pbar: np.ndarray, s_index: int, dt: float) -> np.ndarray:
    """``f_{t_k}(S)`` for every step, shape ``(..., n+1)``."""
    N = pbar.shape[-1]
    n1 = pbar.shape[-2]
    out = np.empty(pbar.shape[:-1])
    for k in range(n1):
        L = N - k
        if s_index >= L:
            raise GridExhausted(f"maturity index {s_index} consumed at step {k}")
        vals = pbar[..., k, :L]
        out[..., k] = -node_derivative(vals, s_index, dt) / vals[..., s_index]
    return out


def rollover_growth(pbar: np.ndarray, s_index: int, dt: float) -> np.ndarray:
    """``exp(sum_{j<k} f_{t_j}(S) dt)`` for every step, shape ``(..., n+1)``."""
    f = forward_history(pbar, s_index, dt)
    cum = np.zeros_like(f)
    cum[..., 1:] = np.cumsum(f[..., :-1] * dt, axis=-1)
    return np.exp(cum)


def rollover_price(path: PathRecord, s: float, k: int) -> float:
    """Discounted price of the S-Roll-Over at step ``k``."""
    idx = path.model.grid.index(s)
    if k == 0:
        return float(path.pbar[0, idx])
    if idx >= path.model.grid.n_points - k:
        raise GridExhausted(f"maturity {s} consumed by step {k}")
    growth = rollover_growth(path.pbar[: k + 1], idx, path.tg.delta_t)
    return float(path.pbar[k, idx] * growth[k])


def boundary_errors(pbar: np.ndarray, dt: float) -> np.ndarray:
    """``|pbar_k(0) - exp(sum_{j<k} pbar_j'(0)/pbar_j(0) dt)|`` per step."""
    ratio = (pbar[..., :-1, 1] - pbar[..., :-1, 0]) / (dt * pbar[..., :-1, 0])
    cum = np.zeros(pbar.shape[:-1])
    cum[..., 1:] = np.cumsum(ratio * dt, axis=-1)
    return np.abs(pbar[..., 0] - np.exp(cum))


def boundary_check(path: PathRecord) -> float:
    return float(np.max(boundary_errors(path.pbar, path.tg.delta_t)))
