"""Grid-discretized curve space: curves of time to maturity, left translations,
the maturity derivative, the discrete H^1 inner product and dual pairings.

A curve lives on a uniform grid ``S_n = n * delta_s``.  The inner product
splits a curve into its tail constant (the value at the last node) plus a
remainder, and uses trapezoid quadrature for the remainder and its
finite-difference derivative::

    (c1, c2) = a1*a2 + int f1*f2 + int f1'*f2'

Dual elements (bond portfolios) are stored explicitly as Dirac atoms plus
Riesz-representer terms, so every pairing is a linear functional on node
values; :meth:`DualElement.weights` exposes that functional as a vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridExhausted, GridMismatch, NonAlignedShift

_ALIGN_TOL = 1e-9


def _as_steps(a: float, delta: float) -> int:
    k = a / delta
    kr = round(k)
    if abs(k - kr) > _ALIGN_TOL * max(1.0, abs(k)):
        raise NonAlignedShift(f"{a!r} is not a multiple of the grid step {delta!r}")
    return int(kr)


@dataclass(frozen=True)
class MaturityGrid:
    """Uniform grid on [0, s_max] with ``n_points`` nodes."""

    delta_s: float
    n_points: int

    def __post_init__(self):
        if not self.delta_s > 0:
            raise ValueError("delta_s must be positive")
        if self.n_points < 1:
            raise ValueError("grid needs at least one node")

    @classmethod
    def from_horizon(cls, s_max: float, delta_s: float) -> "MaturityGrid":
        return cls(float(delta_s), _as_steps(s_max, delta_s) + 1)

    @property
    def s_max(self) -> float:
        return (self.n_points - 1) * self.delta_s

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.delta_s

    def index(self, s: float) -> int:
        """Node index of an on-grid maturity."""
        k = _as_steps(s, self.delta_s)
        if k < 0 or k >= self.n_points:
            raise GridExhausted(f"maturity {s} outside [0, {self.s_max}]")
        return k

    def truncated(self, n_drop: int) -> "MaturityGrid":
        if n_drop >= self.n_points:
            raise GridExhausted(f"cannot drop {n_drop} of {self.n_points} nodes")
        return MaturityGrid(self.delta_s, self.n_points - n_drop)

    def same_as(self, other: "MaturityGrid") -> bool:
        return self.n_points == other.n_points and abs(self.delta_s - other.delta_s) <= 1e-14 * self.delta_s


def _check_grid(g1: MaturityGrid, g2: MaturityGrid):
    if not g1.same_as(g2):
        raise GridMismatch(f"grids differ: {g1} vs {g2}")


@dataclass(frozen=True, eq=False)
class Curve:
    """Real function of time to maturity sampled on a :class:`MaturityGrid`."""

    grid: MaturityGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise GridMismatch(f"expected {self.grid.n_points} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: MaturityGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "Curve":
        return cls(grid, np.broadcast_to(np.asarray(fn(grid.nodes), dtype=float), (grid.n_points,)))

    @classmethod
    def constant(cls, grid: MaturityGrid, value: float) -> "Curve":
        return cls(grid, np.full(grid.n_points, float(value)))

    def __call__(self, s):
        """Linear interpolation between nodes."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < -1e-12) or np.any(s_arr > self.grid.s_max * (1 + 1e-12) + 1e-12):
            raise GridExhausted(f"evaluation point outside [0, {self.grid.s_max}]")
        out = np.interp(s_arr, self.grid.nodes, self.values)
        return float(out) if out.ndim == 0 else out

    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0))

    def _binary(self, other, op):
        if isinstance(other, Curve):
            _check_grid(self.grid, other.grid)
            return Curve(self.grid, op(self.values, other.values))
        return Curve(self.grid, op(self.values, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return Curve(self.grid, -self.values)

    def __repr__(self):
        return f"Curve(n_points={self.grid.n_points}, delta_s={self.grid.delta_s:g})"


def shift(c: Curve, a: float, support: float = 0.0) -> Curve:
    """Left translation ``(L_a c)(S) = c(a + S)``.

    The result lives on a grid shortened by ``a / delta_s`` nodes.  ``support``
    is the time-to-maturity range the caller still needs after the shift.
    """
    if a < 0:
        raise NonAlignedShift("shift amount must be non-negative")
    k = _as_steps(a, c.grid.delta_s)
    if k == 0:
        return c
    if a + support > c.grid.s_max * (1 + 1e-12) or k >= c.grid.n_points:
        raise GridExhausted(f"shift by {a} with support {support} exceeds s_max={c.grid.s_max}")
    return Curve(c.grid.truncated(k), c.values[k:])


def _gradient(values: np.ndarray, delta: float) -> np.ndarray:
    if values.shape[-1] < 3:
        raise ValueError("maturity derivative needs at least 3 nodes")
    return np.gradient(values, delta, axis=-1, edge_order=1)


def _gradient_adjoint(v: np.ndarray, delta: float) -> np.ndarray:
    """Transpose of the stencil used by :func:`_gradient` applied to ``v``."""
    n = v.shape[-1]
    out = np.zeros_like(v)
    out[..., 0] -= v[..., 0] / delta
    out[..., 1] += v[..., 0] / delta
    half = v[..., 1:-1] / (2 * delta)
    out[..., 2:] += half
    out[..., : n - 2] -= half
    out[..., n - 1] += v[..., n - 1] / delta
    out[..., n - 2] -= v[..., n - 1] / delta
    return out


def trapezoid_weights(grid: MaturityGrid) -> np.ndarray:
    w = np.full(grid.n_points, grid.delta_s)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def maturity_derivative(c: Curve) -> Curve:
    """Central differences in the interior, one-sided at both ends."""
    return Curve(c.grid, _gradient(c.values, c.grid.delta_s))


def _split(values: np.ndarray):
    a = values[..., -1]
    return a, values - a[..., None]


def h_inner(c1: Curve, c2: Curve) -> float:
    _check_grid(c1.grid, c2.grid)
    d = c1.grid.delta_s
    w = trapezoid_weights(c1.grid)
    a1, f1 = _split(c1.values)
    a2, f2 = _split(c2.values)
    df1, df2 = _gradient(f1, d), _gradient(f2, d)
    return float(a1 * a2 + np.sum(w * (f1 * f2 + df1 * df2)))


def h_norm(c: Curve) -> float:
    return float(np.sqrt(max(h_inner(c, c), 0.0)))


def riesz_functional(h: Curve) -> np.ndarray:
    """Vector ``l`` with ``h_inner(h, g) == l @ g.values`` for every curve g."""
    d = h.grid.delta_s
    w = trapezoid_weights(h.grid)
    a, f = _split(h.values)
    u = w * f
    ell = u.copy()
    ell[-1] -= u.sum()
    ell += _gradient_adjoint(w * _gradient(f, d), d)
    ell[-1] += a
    return ell


def interpolation_weights(grid: MaturityGrid, s: float) -> np.ndarray:
    """Node weights of the Dirac mass at ``s`` under linear interpolation."""
    if s < -1e-12 or s > grid.s_max * (1 + 1e-12) + 1e-12:
        raise GridExhausted(f"atom at {s} outside [0, {grid.s_max}]")
    w = np.zeros(grid.n_points)
    x = min(max(s / grid.delta_s, 0.0), grid.n_points - 1)
    i = int(np.floor(x))
    frac = x - i
    if abs(frac - round(frac)) < _ALIGN_TOL:
        w[int(round(x))] = 1.0
        return w
    w[i] = 1.0 - frac
    w[i + 1] = frac
    return w


@dataclass(frozen=True)
class RieszTerm:
    coeff: float
    representer: Curve
    multiplier: Curve | None = None


@dataclass(frozen=True)
class DualElement:
    """Bond portfolio at one instant: Dirac atoms plus Riesz terms.

    ``pair(d, c) = sum_k w_k c(S_k) + sum_j c_j (h_j, m_j c)``.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    riesz: tuple[RieszTerm, ...] = field(default_factory=tuple)

    @classmethod
    def dirac(cls, s: float, weight: float = 1.0) -> "DualElement":
        return cls(atoms=((float(s), float(weight)),))

    @classmethod
    def from_riesz(cls, coeffs: Sequence[float], representers: Sequence[Curve], multiplier: Curve | None = None):
        return cls(riesz=tuple(RieszTerm(float(c), h, multiplier) for c, h in zip(coeffs, representers)))

    def __add__(self, other: "DualElement") -> "DualElement":
        return DualElement(self.atoms + other.atoms, self.riesz + other.riesz)

    def scaled(self, alpha: float) -> "DualElement":
        return DualElement(
            tuple((s, alpha * w) for s, w in self.atoms),
            tuple(RieszTerm(alpha * t.coeff, t.representer, t.multiplier) for t in self.riesz),
        )

    def __mul__(self, alpha: float) -> "DualElement":
        return self.scaled(float(alpha))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)

    def with_multiplier(self, m: Curve) -> "DualElement":
        """Compose every Riesz term with an extra multiplication by ``m``."""
        terms = []
        for t in self.riesz:
            mult = m if t.multiplier is None else t.multiplier * m
            terms.append(RieszTerm(t.coeff, t.representer, mult))
        return DualElement(self.atoms, tuple(terms))

    def weights(self, grid: MaturityGrid) -> np.ndarray:
        w = np.zeros(grid.n_points)
        for s, a in self.atoms:
            w += a * interpolation_weights(grid, s)
        for t in self.riesz:
            _check_grid(grid, t.representer.grid)
            ell = riesz_functional(t.representer)
            if t.multiplier is not None:
                _check_grid(grid, t.multiplier.grid)
                ell = ell * t.multiplier.values
            w += t.coeff * ell
        return w


def pair(d: DualElement, c: Curve) -> float:
    total = 0.0
    for s, w in d.atoms:
        total += w * c(s)
    for t in d.riesz:
        g = c if t.multiplier is None else t.multiplier * c
        total += t.coeff * h_inner(t.representer, g)
    return float(total)
