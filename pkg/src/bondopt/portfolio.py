"""Bond portfolios along simulated paths: value, discounted gains,
self-financing residuals and an admissibility diagnostic.

A strategy is stored as node weights per step (the linear functional each
portfolio defines on the valid part of the curve), padded with zeros on the
consumed tail.  Values and loadings are then plain dot products::

    vbar_k      = <theta_k, pbar_k>
    loading_k^i = <theta_k, pbar_k sigma_k^i>
    dGbar_k     = sum_i loading_k^i (dW_k^i - Gamma_k^i dt)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .curvespace import Curve, DualElement, MaturityGrid, h_norm, pair
from .errors import GridExhausted, ValidationError
from .market import PathBatch, PathRecord, rollover_growth

N_PROBES = 200
PROBE_SEED = 20240


@dataclass(eq=False)
class StrategyPath:
    """Portfolio per time step.

    ``weights`` has shape ``(..., n_steps + 1, N)``; a leading axis means one
    strategy per simulated path.  ``theta`` keeps the explicit dual elements
    when the strategy was built for a single path.
    """

    weights: np.ndarray
    provenance: str = "user"
    theta: list | None = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_duals(cls, theta: Sequence[DualElement], grid: MaturityGrid, provenance: str = "user"):
        theta = list(theta)
        w = np.zeros((len(theta), grid.n_points))
        for k, d in enumerate(theta):
            g = grid.truncated(k) if k else grid
            w[k, : g.n_points] = d.weights(g)
        return cls(w, provenance, theta)

    def scaled(self, alpha: float) -> "StrategyPath":
        theta = None if self.theta is None else [d.scaled(alpha) for d in self.theta]
        return StrategyPath(alpha * self.weights, self.provenance, theta)

    def __add__(self, other: "StrategyPath") -> "StrategyPath":
        theta = None
        if self.theta is not None and other.theta is not None:
            theta = [a + b for a, b in zip(self.theta, other.theta)]
        return StrategyPath(self.weights + other.weights, self.provenance, theta)


@dataclass(frozen=True)
class GainsLedger:
    t: np.ndarray
    vbar: np.ndarray
    gbar: np.ndarray
    loadings: np.ndarray  # (..., n_steps + 1, d)

    def rows(self):
        """Rows ``t, vbar, gbar, loading_1..loading_d`` for a single path."""
        if self.vbar.ndim != 1:
            raise ValueError("rows are only defined for a single-path ledger")
        return np.column_stack([self.t, self.vbar, self.gbar, self.loadings])


def value(theta: DualElement, p: Curve) -> float:
    return pair(theta, p)


def _paths(path):
    if isinstance(path, (PathRecord, PathBatch)):
        return path
    raise TypeError("expected a PathRecord or PathBatch")


def ledger_from_weights(weights, pbar, sigma, gamma, dW, dt) -> GainsLedger:
    """Value, loadings and cumulative discounted gains from raw arrays.

    ``weights`` and ``pbar`` are ``(..., n+1, N)``, ``sigma`` ``(n+1, d, N)``,
    ``gamma`` ``(n+1, d)`` and ``dW`` ``(..., n, d)``.
    """
    pv = np.where(np.isnan(pbar), 0.0, pbar)
    wp = weights * pv
    vbar = wp.sum(axis=-1)
    loadings = np.einsum("...kn,kin->...ki", wp, sigma)
    dWbar = dW - gamma[:-1] * dt
    dg = np.sum(loadings[..., :-1, :] * dWbar, axis=-1)
    gbar = np.zeros(vbar.shape)
    gbar[..., 1:] = np.cumsum(dg, axis=-1)
    n1 = vbar.shape[-1]
    return GainsLedger(np.arange(n1) * dt, vbar, gbar, loadings)


def terminal_value(strategy: StrategyPath, path) -> np.ndarray:
    """``<theta_T, pbar_T>`` without building the whole ledger."""
    pT = path.pbar[..., -1, :]
    keep = ~np.isnan(pT)
    return np.sum(np.where(keep, strategy.weights[..., -1, :] * np.where(keep, pT, 0.0), 0.0), axis=-1)


def accumulate_gains(strategy: StrategyPath, path, mpr=None) -> GainsLedger:
    """Discounted gains with left-endpoint loadings.

    ``mpr`` overrides the path model's market price of risk when given.
    """
    path = _paths(path)
    model, tg = path.model, path.tg
    gamma = model.gamma_table(tg) if mpr is None else mpr.table(tg.times)
    w = strategy.weights
    if w.shape[-2:] != path.pbar.shape[-2:]:
        raise ValidationError(f"strategy weights {w.shape} do not match path {path.pbar.shape}", "strategy")
    return ledger_from_weights(w, path.pbar, model.sigma_table(tg), gamma, path.dW, tg.delta_t)


def self_financing_residual(strategy: StrategyPath, path, mpr=None):
    """``max_k |vbar_k - vbar_0 - gbar_k|`` (per path for a batch)."""
    led = accumulate_gains(strategy, path, mpr)
    res = np.abs(led.vbar - led.vbar[..., :1] - led.gbar)
    out = res.max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# --- shipped strategies -------------------------------------------------------


def _atom_weights(path, s_of_k, amounts) -> np.ndarray:
    """Weights of ``amounts[..., k] * delta_{s_of_k[k]}`` on on-grid locations."""
    grid = path.model.grid
    n1 = path.tg.n_steps + 1
    w = np.zeros(np.shape(amounts)[:-1] + (n1, grid.n_points))
    for k in range(n1):
        idx = grid.index(s_of_k[k])
        if idx >= grid.n_points - k:
            raise GridExhausted(f"maturity {s_of_k[k]} consumed at step {k}")
        w[..., k, idx] = amounts[..., k]
    return w


def rollover_strategy(s: float, x0: float, path) -> StrategyPath:
    """``x(t_k) delta_S`` with ``x(t_k) = x0 exp(sum_{j<k} f_{t_j}(S) dt)``."""
    path = _paths(path)
    idx = path.model.grid.index(s)
    x = x0 * rollover_growth(path.pbar, idx, path.tg.delta_t)
    n1 = path.tg.n_steps + 1
    w = _atom_weights(path, [s] * n1, x)
    theta = None
    if isinstance(path, PathRecord):
        theta = [DualElement.dirac(s, float(xk)) for xk in x]
    return StrategyPath(w, "closed-form", theta)


def money_account(x0: float, path) -> StrategyPath:
    return rollover_strategy(0.0, x0, path)


def buy_and_hold(t_maturity: float, path, amount: float = 1.0) -> StrategyPath:
    """Hold ``amount`` bonds maturing at calendar time ``t_maturity``: ``delta_{T - t}``."""
    path = _paths(path)
    tg = path.tg
    if t_maturity < tg.t_bar - 1e-12:
        raise ValidationError("bond matures before the horizon", "t_maturity")
    s_of_k = [t_maturity - t for t in tg.times]
    amounts = np.full(path.pbar.shape[:-2] + (tg.n_steps + 1,), float(amount))
    w = _atom_weights(path, s_of_k, amounts)
    theta = [DualElement.dirac(s, amount) for s in s_of_k] if isinstance(path, PathRecord) else None
    return StrategyPath(w, "closed-form", theta)


def fixed_atom(s: float, path, amount: float = 1.0) -> StrategyPath:
    """Constant ``amount * delta_S``; not self-financing for ``S > 0``."""
    path = _paths(path)
    n1 = path.tg.n_steps + 1
    amounts = np.full(path.pbar.shape[:-2] + (n1,), float(amount))
    w = _atom_weights(path, [s] * n1, amounts)
    theta = [DualElement.dirac(s, amount)] * n1 if isinstance(path, PathRecord) else None
    return StrategyPath(w, "user", theta)


# --- admissibility -------------------------------------------------------------


def _biweight(x, centre, width):
    u = (x - centre) / width
    return np.where(np.abs(u) < 1, (1 - u**2) ** 2, 0.0)


@lru_cache(maxsize=8)
def _probe_cache(delta_s: float, n_points: int, support: float, n_probes: int, seed: int):
    grid = MaturityGrid(delta_s, n_points)
    x = grid.nodes
    rng = np.random.default_rng(seed)
    out = np.empty((n_probes, n_points))
    for j in range(n_probes):
        v = np.full(n_points, rng.uniform(-1, 1))
        for _ in range(rng.integers(1, 4)):
            width = min(rng.uniform(0.2, 1.0), support / 2)
            centre = rng.uniform(width, support - width)
            v = v + rng.normal() * _biweight(x, centre, width)
        out[j] = v / h_norm(Curve(grid, v))
    out.flags.writeable = False
    return out


def probe_dictionary(grid: MaturityGrid, t_bar: float, n_probes: int = N_PROBES, seed: int = PROBE_SEED):
    """Seeded unit-norm probe curves, shape ``(n_probes, N)``.

    Each probe is a constant plus C^1 bumps supported in ``[0, s_max - t_bar]``,
    so its norm is unchanged on any grid truncated by at most ``t_bar``.
    """
    support = grid.s_max - t_bar
    if support <= 4 * grid.delta_s:
        raise GridExhausted("maturity grid too short for the probe dictionary")
    return _probe_cache(grid.delta_s, grid.n_points, support, n_probes, seed)


def dual_norm(weights: np.ndarray, probes: np.ndarray) -> np.ndarray:
    """Probe surrogate ``sup_j |<theta, c_j>|`` along the last axis."""
    return np.max(np.abs(weights @ probes.T), axis=-1)


def admissibility_diagnostic(strategy: StrategyPath, paths, mpr=None) -> float:
    """MC estimate of ``E[int (|theta|^2 + |sigma* theta pbar|^2) dt + (int |<theta, pbar m>| dt)^2]``."""
    paths = _paths(paths)
    led = accumulate_gains(strategy, paths, mpr)
    model, tg = paths.model, paths.tg
    gamma = model.gamma_table(tg) if mpr is None else mpr.table(tg.times)
    dt = tg.delta_t
    probes = probe_dictionary(model.grid, tg.t_bar)
    w = strategy.weights[..., :-1, :]
    load = led.loadings[..., :-1, :]
    norm_sq = dual_norm(w, probes) ** 2
    drift_pair = -np.sum(load * gamma[:-1], axis=-1)
    per_path = (
        np.sum(norm_sq + np.sum(load**2, axis=-1), axis=-1) * dt + (np.sum(np.abs(drift_pair), axis=-1) * dt) ** 2
    )
    return float(np.mean(per_path))
