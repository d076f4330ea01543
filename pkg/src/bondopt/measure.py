"""Girsanov density, P/Q conversions and lognormal quadrature.

With deterministic market price of risk the density is lognormal::

    xi_t = exp(-c(t)/2 + sum_i int Gamma^i dW^i),   c(t) = int_0^t |Gamma_s|^2 ds

and under Q, ``xi_T = xi_t * exp(N(c_rem/2, c_rem))``.  Every conditional
expectation of a function of ``xi_T`` is therefore a one-dimensional
Gauss-Hermite integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NonFinite

DEFAULT_NODES = 64


@lru_cache(maxsize=None)
def gauss_hermite(n_nodes: int):
    """Nodes and weights for expectations against the standard normal."""
    if n_nodes < 2:
        raise ValueError("need at least 2 quadrature nodes")
    z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / np.sqrt(2 * np.pi)
    z.flags.writeable = False
    w.flags.writeable = False
    return z, w


def _finite(vals: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(vals)):
        raise NonFinite(f"{what} is not finite at a quadrature node")
    return vals


def gaussian_expect(g: Callable, n_nodes: int = DEFAULT_NODES) -> float:
    """``E g(Z)`` for standard normal ``Z``."""
    z, w = gauss_hermite(n_nodes)
    return float(np.dot(w, _finite(np.asarray(g(z), dtype=float), "integrand")))


def lognormal_expect(g: Callable, c_total: float, n_nodes: int = DEFAULT_NODES) -> float:
    """``E_P g(xi_T)`` with ``xi_T = exp(sqrt(c) Z - c/2)``.

    ``g`` must accept numpy arrays.
    """
    if c_total < 0:
        raise ValueError("c_total must be non-negative")
    if c_total == 0:
        return float(_finite(np.asarray(g(np.array([1.0])), dtype=float), "integrand")[0])
    z, w = gauss_hermite(n_nodes)
    x = np.exp(np.sqrt(c_total) * z - 0.5 * c_total)
    with np.errstate(all="ignore"):
        vals = np.asarray(g(x), dtype=float)
    return float(np.dot(w, _finite(vals, "integrand")))


def conditional_Q_expect(g: Callable, xi_t, c_remaining, n_nodes: int = DEFAULT_NODES):
    """``E_Q[g(xi_T) | F_t]`` given ``xi_t`` and the remaining budget ``c(T) - c(t)``.

    ``xi_t`` and ``c_remaining`` broadcast; the result has their broadcast shape.
    """
    xi_t = np.asarray(xi_t, dtype=float)
    c_rem = np.asarray(c_remaining, dtype=float)
    if np.any(xi_t <= 0):
        raise ValueError("xi_t must be positive")
    if np.any(c_rem < 0):
        raise ValueError("c_remaining must be non-negative")
    xi_t, c_rem = np.broadcast_arrays(xi_t, c_rem)
    z, w = gauss_hermite(n_nodes)
    sc = np.sqrt(c_rem)[..., None]
    x = xi_t[..., None] * np.exp(sc * z + 0.5 * c_rem[..., None])
    with np.errstate(all="ignore"):
        vals = np.asarray(g(x), dtype=float)
    out = _finite(vals, "integrand") @ w
    # c_rem = 0 collapses the integral to a point evaluation; do it exactly
    zero = c_rem == 0
    if np.any(zero):
        with np.errstate(all="ignore"):
            direct = _finite(np.asarray(g(xi_t[zero]), dtype=float), "integrand")
        out = np.array(out, dtype=float)
        out[zero] = direct
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RiskBudget:
    """Cumulative ``c(t_k) = sum_{j<k} |Gamma_{t_j}|^2 dt`` on a time grid.

    ``gamma`` holds the step values ``Gamma_{t_j}``, shape ``(n_steps, d)``.
    Between nodes ``c`` is linear, which is exact for piecewise-constant Gamma.
    """

    gamma: np.ndarray
    dt: float

    @classmethod
    def from_model(cls, model, tg) -> "RiskBudget":
        return cls(np.asarray(model.gamma_table(tg)[:-1], dtype=float), tg.delta_t)

    @classmethod
    def constant(cls, gamma, t_bar: float, dt: float) -> "RiskBudget":
        n = int(round(t_bar / dt))
        g = np.atleast_1d(np.asarray(gamma, dtype=float))
        return cls(np.tile(g, (n, 1)), dt)

    @property
    def n_steps(self) -> int:
        return self.gamma.shape[0]

    @property
    def t_bar(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def c(self) -> np.ndarray:
        out = np.zeros(self.n_steps + 1)
        out[1:] = np.cumsum(np.sum(self.gamma**2, axis=1) * self.dt)
        return out

    @property
    def total(self) -> float:
        return float(self.c[-1])

    def remaining(self, k=None) -> np.ndarray:
        rem = self.total - self.c
        return rem if k is None else rem[k]

    def at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.c)

    def remaining_at(self, t):
        return self.total - self.at(t)

    def gamma_sq(self, t) -> np.ndarray:
        """``|Gamma_t|^2`` with the step value taken from the left node."""
        k = np.clip(np.floor(np.asarray(t) / self.dt + 1e-9).astype(int), 0, self.n_steps - 1)
        return np.sum(self.gamma**2, axis=1)[k]


@dataclass(frozen=True)
class DensityPath:
    """``xi[k]`` and ``mb[k] = sum_{j<k} Gamma_j dW_j`` along one or many paths."""

    xi: np.ndarray
    mb: np.ndarray
    c: np.ndarray

    @property
    def mq(self) -> np.ndarray:
        """``M(t) = int Gamma dWbar``, a Q-martingale: ``xi = exp(M + c/2)``."""
        return self.mb - self.c


def xi_path(gamma: np.ndarray, dW: np.ndarray, dt: float) -> DensityPath:
    """Density path from step values ``gamma`` ``(n, d)`` and increments ``(..., n, d)``."""
    gamma = np.asarray(gamma, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if gamma.shape != dW.shape[-2:]:
        raise ValueError(f"gamma {gamma.shape} and increments {dW.shape} are not aligned")
    budget = RiskBudget(gamma, dt)
    c = budget.c
    mb = np.zeros(dW.shape[:-2] + (dW.shape[-2] + 1,))
    mb[..., 1:] = np.cumsum(np.sum(dW * gamma, axis=-1), axis=-1)
    return DensityPath(np.exp(mb - 0.5 * c), mb, c)


def q_shift(gamma: np.ndarray, dW: np.ndarray, dt: float) -> np.ndarray:
    """Q-Brownian increments ``dWbar = dW - Gamma dt``."""
    return np.asarray(dW, dtype=float) - np.asarray(gamma, dtype=float) * dt
