"""Utility-optimal terminal wealth and its zero-coupon hedge.

The optimal discounted terminal wealth is ``X = phi(lam * xi_T)`` with ``phi``
the inverse marginal utility and ``lam`` fixed by the budget
``E[xi_T phi(lam xi_T)] = K0``.  With deterministic volatilities and market
price of risk the hedge is explicit::

    theta_t = a_t delta_0 + b_t * gamma_t o (L_t p0 / pbar_t)
    b_t     = E_Q[lam xi_T phi'(lam xi_T) | F_t]
    a_t     = (Y(t) - b_t <gamma_t, L_t p0>) / pbar_t(0)

where ``gamma_t`` is the minimal-norm dual element with
``<gamma_t, sigma^i_t L_t p0> = Gamma^i_t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .curvespace import Curve, DualElement, h_inner, riesz_functional, shift
from .errors import (
    BracketFailure,
    DegenerateFund,
    DomainViolation,
    NonConvergence,
    SingularGram,
    StepTooLarge,
    UnsupportedKind,
    ValidationError,
)
from .market import MarketModel, PathBatch, PathRecord, TimeGrid
from .measure import (
    DEFAULT_NODES,
    DensityPath,
    RiskBudget,
    conditional_Q_expect,
    gauss_hermite,
    lognormal_expect,
)
from .portfolio import StrategyPath
from .streams import normal_stream

COND_LIMIT = 1e12
LAMBDA_RTOL = 1e-10


# --- utilities ------------------------------------------------------------------


@dataclass(frozen=True)
class Utility:
    """Utility described through its inverse marginal ``phi`` on the domain ``I``.

    ``domain`` is ``"positive"`` for ``I = (0, inf)`` and ``"real"`` for ``I = R``.
    ``growth`` holds ``(C, p, q)`` with ``|phi(y)| <= C (y^p + y^-p)`` (or
    ``C (1 + |y|)^p`` on R) and the same bound with exponent ``q`` for ``|y phi'(y)|``.
    """

    kind: str
    phi: Callable
    phi_prime: Callable
    u: Callable
    domain: str
    x_floor: float
    mu: float | None = None
    growth: tuple = (1.0, 1.0, 1.0)

    def in_domain(self, y) -> bool:
        y = np.asarray(y)
        return bool(np.all(np.isfinite(y)) and (self.domain == "real" or np.all(y > 0)))

    def quadrature_nodes(self) -> int:
        if self.kind == "power" and self.mu >= 0.8:
            return 128
        return DEFAULT_NODES

    def growth_check(self, y: np.ndarray) -> bool:
        """Sampled check of the growth bounds on the points ``y``."""
        C, p, q = self.growth
        y = np.asarray(y, dtype=float)
        if self.domain == "positive":
            y = y[y > 0]
            bp, bq = C * (y**p + y**-p), C * (y**q + y**-q)
        else:
            bp, bq = C * (1 + np.abs(y)) ** p, C * (1 + np.abs(y)) ** q
        with np.errstate(all="ignore"):
            ok_p = np.abs(self.phi(y)) <= bp * (1 + 1e-12)
            ok_q = np.abs(y * self.phi_prime(y)) <= bq * (1 + 1e-12)
        return bool(np.all(ok_p) and np.all(ok_q))


def quadratic_utility(mu: float) -> Utility:
    """``u(x) = mu x - x^2/2`` (bliss level ``mu``)."""
    mu = float(mu)
    if not math.isfinite(mu):
        raise ValidationError("quadratic mu must be finite", "objective.mu")
    return Utility(
        "quadratic",
        phi=lambda y: mu - np.asarray(y, dtype=float),
        phi_prime=lambda y: -np.ones_like(np.asarray(y, dtype=float)),
        u=lambda x: mu * np.asarray(x, dtype=float) - 0.5 * np.asarray(x, dtype=float) ** 2,
        domain="real",
        x_floor=-math.inf,
        mu=mu,
        growth=(max(1.0, abs(mu)), 1.0, 1.0),
    )


def exponential_utility(mu: float) -> Utility:
    """``u(x) = -exp(-mu x)``, ``mu > 0``."""
    mu = float(mu)
    if not mu > 0:
        raise ValidationError("exponential utility needs mu > 0", "objective.mu")
    return Utility(
        "exponential",
        phi=lambda y: -np.log(np.asarray(y, dtype=float) / mu) / mu,
        phi_prime=lambda y: -1.0 / (mu * np.asarray(y, dtype=float)),
        u=lambda x: -np.exp(-mu * np.asarray(x, dtype=float)),
        domain="positive",
        x_floor=-math.inf,
        mu=mu,
        growth=((1 + abs(math.log(mu)) / 2) / mu, 1.0, 1.0),
    )


def power_utility(mu: float) -> Utility:
    """``u(x) = x^mu``, ``0 < mu < 1``."""
    mu = float(mu)
    if not 0 < mu < 1:
        raise ValidationError(f"power utility needs 0 < mu < 1, got {mu:g}", "objective.mu")
    k = 1.0 / (1.0 - mu)
    return Utility(
        "power",
        phi=lambda y: (np.asarray(y, dtype=float) / mu) ** (-k),
        phi_prime=lambda y: -k / mu * (np.asarray(y, dtype=float) / mu) ** (-k - 1),
        u=lambda x: np.asarray(x, dtype=float) ** mu,
        domain="positive",
        x_floor=0.0,
        mu=mu,
        growth=(k * mu**k, k, k),
    )


def log_utility() -> Utility:
    return Utility(
        "log",
        phi=lambda y: 1.0 / np.asarray(y, dtype=float),
        phi_prime=lambda y: -1.0 / np.asarray(y, dtype=float) ** 2,
        u=lambda x: np.log(np.asarray(x, dtype=float)),
        domain="positive",
        x_floor=0.0,
        growth=(1.0, 1.0, 1.0),
    )


def custom_utility(phi: Callable, phi_prime: Callable, domain: str = "positive", x_floor: float = -math.inf,
                   growth=(1.0, 1.0, 1.0)) -> Utility:
    """Utility given by ``phi`` and ``phi'`` only.

    ``u`` is recovered up to a constant as ``int u'`` with ``u' = phi^{-1}``
    (for reporting; the optimizer itself only uses ``phi``).
    """
    if domain not in ("positive", "real"):
        raise ValidationError("domain must be 'positive' or 'real'", "objective.domain")
    lo = 0.0 if domain == "positive" else -math.inf

    def u_prime(x):
        f = lambda y: float(phi(y)) - x
        a, b = (1e-300 if lo == 0 else -1.0), 1.0
        while f(b) > 0:
            b *= 2
        if lo == 0:
            while a < b and f(a) < 0:
                a = a * 1e3 if a > 1e-300 else 1e-200
        else:
            while f(a) < 0:
                a *= 2
        return optimize.brentq(f, a, b, xtol=1e-14, rtol=1e-14)

    x_ref = x_floor + 1.0 if math.isfinite(x_floor) else 0.0

    def u(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([integrate.quad(u_prime, x_ref, xi)[0] for xi in xs.ravel()]).reshape(xs.shape)
        return out if np.ndim(x) else float(out[0])

    return Utility("custom", phi, phi_prime, u, domain, float(x_floor), None, tuple(growth))


def make_utility(kind: str, mu: float | None = None) -> Utility:
    if kind == "quadratic":
        return quadratic_utility(mu)
    if kind == "exponential":
        return exponential_utility(mu)
    if kind == "power":
        return power_utility(mu)
    if kind == "log":
        return log_utility()
    raise UnsupportedKind(f"no built-in utility {kind!r}")


# --- closed forms -----------------------------------------------------------------


def closed_form_lambda(u: Utility, K0: float, c_total: float) -> float:
    if u.kind == "quadratic":
        return (u.mu - K0) * math.exp(-c_total)
    if u.kind == "exponential":
        return u.mu * math.exp(-u.mu * K0 - 0.5 * c_total)
    if u.kind == "power":
        mu = u.mu
        return mu * (K0 * math.exp(-mu * c_total / (2 * (1 - mu) ** 2))) ** (-(1 - mu))
    if u.kind == "log":
        return 1.0 / K0
    raise UnsupportedKind(f"no closed-form multiplier for {u.kind!r}")


def closed_form_wealth(u: Utility, K0: float, mq, c_t):
    """Optimal discounted wealth in terms of ``M(t) = int Gamma dWbar`` and ``c(t)``."""
    mq, c_t = np.asarray(mq, dtype=float), np.asarray(c_t, dtype=float)
    if u.kind == "quadratic":
        return u.mu + (K0 - u.mu) * np.exp(mq - 0.5 * c_t)
    if u.kind == "exponential":
        return K0 - mq / u.mu
    if u.kind == "power":
        k = 1.0 / (1.0 - u.mu)
        return K0 * np.exp(-k * mq - 0.5 * k * k * c_t)
    if u.kind == "log":
        return K0 * np.exp(-mq - 0.5 * c_t)
    raise UnsupportedKind(f"no closed-form wealth for {u.kind!r}")


def closed_form_b(u: Utility, y):
    y = np.asarray(y, dtype=float)
    if u.kind == "quadratic":
        return y - u.mu
    if u.kind == "exponential":
        return np.full_like(y, -1.0 / u.mu)
    if u.kind == "power":
        return -y / (1.0 - u.mu)
    if u.kind == "log":
        return -y
    raise UnsupportedKind(f"no closed-form b for {u.kind!r}")


def optimal_utility_surface(u: Utility, risk: RiskBudget) -> Callable:
    """Closed-form value function ``U(t, w)`` of the optimal problem."""
    if u.kind not in ("quadratic", "exponential", "power", "log"):
        raise UnsupportedKind(f"no closed-form surface for {u.kind!r}")
    mu = u.mu

    def U(t, w):
        cr = risk.remaining_at(t)
        w = np.asarray(w, dtype=float)
        if u.kind == "quadratic":
            e = np.exp(-cr)
            return (-0.5 * w**2 + mu * w) * e + 0.5 * mu**2 * (1 - e)
        if u.kind == "exponential":
            return -np.exp(-mu * w - 0.5 * cr)
        if u.kind == "power":
            return w**mu * np.exp(mu / (2 * (1 - mu)) * cr)
        return np.log(w) + 0.5 * cr

    return U


# --- multiplier -----------------------------------------------------------------


def _budget(u: Utility, c_total: float, n_nodes: int, samples=None):
    if samples is None:
        def h(lam):
            return lognormal_expect(lambda x: x * u.phi(lam * x), c_total, n_nodes)
    else:
        z = np.asarray(samples, dtype=float)

        def h(lam):
            with np.errstate(all="ignore"):
                v = z * u.phi(lam * z)
            return float(np.mean(v))
    return h


def solve_lambda(u: Utility, K0: float, c_total: float, n_nodes: int | None = None, samples=None,
                 max_iter: int = 200) -> float:
    """Budget multiplier: the unique ``lam`` with ``E[xi phi(lam xi)] = K0``.

    ``samples`` switches to a sample average over the given values of the
    state-price deflator (terminal mode uses ``xi_T * pbar_T(0)``).
    """
    if not K0 > u.x_floor:
        raise ValidationError(f"K0={K0:g} must exceed the utility's lower endpoint {u.x_floor:g}", "objective.K0")
    if c_total < 0:
        raise ValueError("c_total must be non-negative")
    h = _budget(u, c_total, n_nodes or u.quadrature_nodes(), samples)
    f = lambda lam: h(lam) - K0

    f1 = f(1.0)
    if f1 == 0:
        return 1.0
    count = 0
    if f1 > 0:
        lo, hi = 1.0, 2.0
        while not f(hi) < 0:
            lo, hi = hi, 2 * hi
            count += 1
            if count > max_iter:
                raise BracketFailure(f"no multiplier bracket for K0={K0:g}")
    else:
        hi = 1.0
        lo = 0.5 if u.domain == "positive" else -1.0
        while not f(lo) > 0:
            hi, lo = lo, (lo / 2 if u.domain == "positive" else 2 * lo)
            count += 1
            if count > max_iter:
                raise BracketFailure(f"no multiplier bracket for K0={K0:g}")
    try:
        lam, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                    maxiter=max_iter, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence(str(exc)) from exc
    if not info.converged:
        raise NonConvergence(f"root-finder stopped after {info.iterations} iterations")
    if abs(f(lam)) > LAMBDA_RTOL * max(1.0, abs(K0)):
        raise NonConvergence(f"budget residual {abs(f(lam)):.3g} too large")
    return float(lam)


def lambda_monotone(u: Utility, c_total: float, lams, n_nodes: int | None = None) -> bool:
    h = _budget(u, c_total, n_nodes or u.quadrature_nodes())
    vals = np.array([h(l) for l in lams])
    return bool(np.all(np.diff(vals) < 0))


# --- Gram solve -------------------------------------------------------------------


@dataclass(frozen=True)
class GammaStep:
    """Minimal-norm dual element at one step and its ingredients."""

    coeffs: np.ndarray
    representers: tuple
    shifted_p0: Curve
    ell: np.ndarray  # node functional of gamma on the truncated grid

    @property
    def dual(self) -> DualElement:
        return DualElement.from_riesz(self.coeffs, self.representers)

    @property
    def g(self) -> float:
        """``<gamma, L_t p0>``."""
        return float(self.ell @ self.shifted_p0.values)


def gamma_solve(model: MarketModel, tg: TimeGrid, k: int) -> GammaStep:
    """Solve ``A c = Gamma`` with ``A_ij = (h_i, h_j)``, ``h_i = sigma^i_{t_k} L_{t_k} p0``."""
    sig = model.sigma_table(tg)[k]
    gam = model.gamma_table(tg)[k]
    lp0 = shift(model.p0, k * tg.delta_t)
    n_valid = lp0.grid.n_points
    reps = tuple(Curve(lp0.grid, sig[i, :n_valid] * lp0.values) for i in range(model.d))
    A = np.array([[h_inner(hi, hj) for hj in reps] for hi in reps])
    if not np.any(gam):
        c = np.zeros(model.d)
    else:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            warnings.warn(f"Gram matrix condition number {cond:.3g} at step {k}; using pseudo-inverse", SingularGram)
            c = np.linalg.pinv(A, rcond=1.0 / COND_LIMIT) @ gam
        else:
            c = np.linalg.solve(A, gam)
    ell = np.zeros(n_valid)
    for cj, h in zip(c, reps):
        if cj:
            ell += cj * riesz_functional(h)
    return GammaStep(c, reps, lp0, ell)


# --- plan -------------------------------------------------------------------------


@dataclass(eq=False)
class OptimalPlan:
    utility: Utility
    K0: float
    lam: float
    risk: RiskBudget
    mode: str = "discounted"
    n_nodes: int = DEFAULT_NODES
    model: MarketModel | None = None
    tg: TimeGrid | None = None
    _gamma: dict = field(default_factory=dict, repr=False)

    def _check_discounted(self):
        if self.mode != "discounted":
            raise UnsupportedKind("wealth and hedge evaluators are only defined in discounted mode")

    def Y(self, k, xi):
        """Optimal discounted wealth at step ``k`` given ``xi_{t_k}``."""
        self._check_discounted()
        u, lam = self.utility, self.lam
        return conditional_Q_expect(lambda x: u.phi(lam * x), xi, self.risk.remaining(k), self.n_nodes)

    def b(self, k, xi):
        self._check_discounted()
        u, lam = self.utility, self.lam
        return conditional_Q_expect(lambda x: lam * x * u.phi_prime(lam * x), xi, self.risk.remaining(k), self.n_nodes)

    def gamma(self, k: int) -> GammaStep:
        if k not in self._gamma:
            self._gamma[k] = gamma_solve(self.model, self.tg, k)
        return self._gamma[k]

    def gamma_table(self):
        return [self.gamma(k) for k in range(self.tg.n_steps + 1)]

    @property
    def U(self):
        return optimal_utility_surface(self.utility, self.risk)


def make_plan(u: Utility, K0: float, model: MarketModel, tg: TimeGrid, mode: str = "discounted",
              n_nodes: int | None = None, samples=None) -> OptimalPlan:
    """Solve the multiplier and bind the plan to a market and time grid."""
    if mode not in ("discounted", "terminal"):
        raise ValidationError(f"unknown discounting mode {mode!r}", "objective.discounting_mode")
    risk = RiskBudget.from_model(model, tg)
    n = n_nodes or u.quadrature_nodes()
    if mode == "terminal" and samples is None:
        raise ValidationError("terminal mode needs samples of xi_T * pbar_T(0)", "objective.discounting_mode")
    lam = solve_lambda(u, K0, risk.total, n, samples if mode == "terminal" else None)
    return OptimalPlan(u, float(K0), lam, risk, mode, n, model, tg)


def optimal_terminal_wealth(plan: OptimalPlan, xi_T, pbar_T0=None):
    """``phi(lam xi_T)`` (discounted) or ``phi(pbar_T(0) lam xi_T)`` (terminal)."""
    xi_T = np.asarray(xi_T, dtype=float)
    if np.any(xi_T <= 0):
        raise DomainViolation("xi_T must be positive")
    y = plan.lam * xi_T
    if plan.mode == "terminal":
        if pbar_T0 is None:
            raise ValueError("terminal mode needs the path's discount factor pbar_T(0)")
        y = y * np.asarray(pbar_T0, dtype=float)
    if not plan.utility.in_domain(y):
        raise DomainViolation("phi argument left the utility's domain")
    out = plan.utility.phi(y)
    return float(out) if np.ndim(out) == 0 else out


def wealth_process(plan: OptimalPlan, density: DensityPath, risk: RiskBudget | None = None) -> np.ndarray:
    """``Y[k] = E_Q[phi(lam xi_T) | F_{t_k}]`` along the density path(s)."""
    plan._check_discounted()
    risk = risk or plan.risk
    u, lam = plan.utility, plan.lam
    return conditional_Q_expect(lambda x: u.phi(lam * x), density.xi, risk.remaining(), plan.n_nodes)


# --- hedge ------------------------------------------------------------------------


def hedge_plan(plan: OptimalPlan, model: MarketModel | None = None, path=None) -> StrategyPath:
    """Explicit replicating strategy of the optimal wealth along a path or batch.

    The returned strategy carries ``a``, ``b``, ``Y`` and ``g`` in ``extras``.
    """
    plan._check_discounted()
    if path is None:
        raise ValueError("a simulated path is required")
    model = model or plan.model
    if plan.model is None:
        plan.model, plan.tg = model, path.tg
    if plan.tg != path.tg:
        raise ValidationError(f"plan built on {plan.tg}, path simulated on {path.tg}", "time")
    N = model.grid.n_points
    xi = path.xi
    Y = plan.Y(None, xi)
    b = plan.b(None, xi)
    steps = plan.gamma_table()
    g = np.array([s.g for s in steps])
    p00 = path.pbar[..., 0]
    a = (Y - b * g) / p00
    w = np.zeros(path.pbar.shape)
    for k, st in enumerate(steps):
        L = N - k
        ratio = st.shifted_p0.values / path.pbar[..., k, :L]
        w[..., k, :L] = b[..., k, None] * st.ell * ratio
        w[..., k, 0] += a[..., k]
    theta = None
    if isinstance(path, PathRecord):
        theta = []
        for k, st in enumerate(steps):
            mult = st.shifted_p0 / path.curve(k)
            theta.append(DualElement.dirac(0.0, float(a[k])) + st.dual.with_multiplier(mult).scaled(float(b[k])))
    return StrategyPath(w, "closed-form", theta, {"a": a, "b": b, "Y": Y, "g": g})


def hedge_batch(plan: OptimalPlan, batch: PathBatch) -> StrategyPath:
    return hedge_plan(plan, batch.model, batch)


# --- HJB ---------------------------------------------------------------------------


def _hjb_fd(U, gsq, t, w, ht, hw):
    ut = (U(t + ht, w) - U(t - ht, w)) / (2 * ht)
    uw = (U(t, w + hw) - U(t, w - hw)) / (2 * hw)
    uww = (U(t, w + hw) - 2 * U(t, w) + U(t, w - hw)) / hw**2
    return ut, uw, uww, np.abs(ut * uww - 0.5 * gsq * uw**2)


def hjb_residual(u: Utility, risk: RiskBudget, t, w, h_t: float = 1e-3, h_w: float = 1e-3, tol: float = 1e-4):
    """Central-difference residual of ``U_t U_ww = |Gamma_t|^2 U_w^2 / 2``.

    Raises :class:`StepTooLarge` when the residual exceeds ``tol`` and halving
    both steps shrinks it markedly, i.e. truncation error dominates.
    """
    U = optimal_utility_surface(u, risk)
    gsq = risk.gamma_sq(t)
    r = _hjb_fd(U, gsq, t, w, h_t, h_w)[3]
    if np.any(r > tol):
        r2 = _hjb_fd(U, gsq, t, w, h_t / 2, h_w / 2)[3]
        if np.any(r2 < r / 2):
            raise StepTooLarge(f"residual {np.max(r):.3g} is dominated by finite-difference truncation")
    return float(r) if np.ndim(r) == 0 else r


def feedback_ratio(u: Utility, risk: RiskBudget, t, w, h_w: float = 1e-3):
    """``U_w / U_ww`` by central differences; equals the hedge's ``b_t`` at ``w = Y(t)``."""
    U = optimal_utility_surface(u, risk)
    _, uw, uww, _ = _hjb_fd(U, 0.0, t, w, 1e-3, h_w)
    return uw / uww


# --- mutual fund ---------------------------------------------------------------


@dataclass
class FundDecomposition:
    x: np.ndarray
    y: np.ndarray
    fund: StrategyPath
    reconstructed: StrategyPath


def reference_plan(model: MarketModel, tg: TimeGrid) -> OptimalPlan:
    """Square-root utility plan with one unit of initial wealth."""
    return make_plan(power_utility(0.5), 1.0, model, tg)


def mutual_fund_decompose(plan: OptimalPlan, reference_plan_sqrt: OptimalPlan, path) -> FundDecomposition:
    """Write the optimal hedge as ``x_t delta_0 + y_t Theta_t`` with ``Theta`` the reference fund."""
    ref = reference_plan_sqrt
    if ref.utility.kind != "power" or abs(ref.utility.mu - 0.5) > 1e-15 or abs(ref.K0 - 1.0) > 1e-15:
        raise ValidationError("reference fund must be the square-root plan with K0 = 1", "reference_plan")
    own = hedge_plan(plan, plan.model, path)
    fund = hedge_plan(ref, ref.model, path)
    a, b = own.extras["a"], own.extras["b"]
    a1, b1 = fund.extras["a"], fund.extras["b"]
    if np.any(b1 == 0) or not np.all(np.isfinite(b1)):
        raise DegenerateFund("reference fund has a vanishing risky coefficient")
    y = b / b1
    x = a - a1 * y
    w = y[..., None] * fund.weights
    w[..., 0] += x
    theta = None
    if fund.theta is not None:
        theta = [DualElement.dirac(0.0, float(xk)) + th.scaled(float(yk)) for xk, yk, th in zip(x, y, fund.theta)]
    return FundDecomposition(x, y, fund, StrategyPath(w, "mutual-fund", theta))


# --- Clark-Ocone ------------------------------------------------------------------


def clark_ocone_check(F: Callable, F_prime: Callable, risk: RiskBudget, dWbar, n_nodes: int = DEFAULT_NODES):
    """RMS of ``F(M_T) - E_Q F - sum_k E_Q[F'(M_T)|F_k] dM_k`` over Q-paths.

    ``dWbar`` holds Q-Brownian increments ``(P, n, d)`` (a :class:`PathBatch`
    is accepted, its increments being read as Q-increments).  Returns
    ``(rms, residuals)``.
    """
    if isinstance(dWbar, (PathBatch, PathRecord)):
        dWbar = dWbar.dW
    dWbar = np.asarray(dWbar, dtype=float)
    dM = np.sum(dWbar * risk.gamma, axis=-1)
    M = np.zeros(dM.shape[:-1] + (dM.shape[-1] + 1,))
    M[..., 1:] = np.cumsum(dM, axis=-1)
    z, w = gauss_hermite(n_nodes)
    c_rem = risk.remaining()
    mean_F = float(np.dot(w, F(np.sqrt(risk.total) * z)))
    integrand = np.dot(F_prime(M[..., :-1, None] + np.sqrt(c_rem[:-1])[:, None] * z), w)
    rhs = mean_F + np.sum(integrand * dM, axis=-1)
    res = F(M[..., -1]) - rhs
    return float(np.sqrt(np.mean(res**2))), res


def optimizer_functional(plan: OptimalPlan):
    """``F(m) = phi(lam exp(m + c/2))`` and its derivative, so ``X = F(M_T)``."""
    u, lam, c = plan.utility, plan.lam, plan.risk.total

    def F(m):
        return u.phi(lam * np.exp(np.asarray(m) + 0.5 * c))

    def Fp(m):
        y = lam * np.exp(np.asarray(m) + 0.5 * c)
        return u.phi_prime(y) * y

    return F, Fp


# --- optimality stress ------------------------------------------------------------


@dataclass(frozen=True)
class StressResult:
    beta: float
    scale: float
    gap: float
    std_err: float
    quad_err: float

    @property
    def passed(self) -> bool:
        return self.gap > 3 * self.std_err + self.quad_err


def _gh_expect(g, c, n):
    return lognormal_expect(g, c, n)


def optimality_stress(plan: OptimalPlan, n_payoffs: int = 20, n_samples: int = 100_000, seed: int = 11,
                      betas=None) -> list:
    """Compare ``E u(X_opt)`` with budget-feasible perturbations built from powers of ``xi_T``.

    Real-line wealth: ``X = X_opt + eps (xi^beta - kappa)`` with ``eps > 0`` and
    ``kappa = E xi^(beta+1)``, so the budget is untouched and ``X`` stays above
    ``X_opt - eps kappa``.  Positive wealth: ``X = s X_opt xi^beta`` with ``s``
    restoring the budget.  The gap is a paired MC mean over common ``xi_T`` draws.
    """
    u, lam, c, n = plan.utility, plan.lam, plan.risk.total, plan.n_nodes
    if betas is None:
        mags = np.linspace(0.3, 1.0, (n_payoffs + 1) // 2)
        betas = np.concatenate([mags, -mags])[:n_payoffs]
    zs = normal_stream(seed, 0, 0, n_samples)
    xi = np.exp(np.sqrt(c) * zs - 0.5 * c)
    X_opt = u.phi(lam * xi)
    u_opt = u.u(X_opt)
    results = []
    for j, beta in enumerate(betas):
        beta = float(beta)
        if u.x_floor == -math.inf:
            kappa = _gh_expect(lambda x: x ** (beta + 1), c, n)
            pert = xi**beta - kappa
            eps = 0.2 * (1 + (j % 3) / 2) * max(1.0, abs(plan.K0)) / max(float(np.std(pert)), 1e-300)
            X = X_opt + eps * pert
            scale = eps

            def alt(x, eps=eps, kappa=kappa, beta=beta):
                return u.u(u.phi(lam * x) + eps * (x**beta - kappa))
        else:
            s = plan.K0 / _gh_expect(lambda x: x * u.phi(lam * x) * x**beta, c, n)
            X = s * X_opt * xi**beta
            scale = s

            def alt(x, s=s, beta=beta):
                return u.u(s * u.phi(lam * x) * x**beta)
        d = u_opt - u.u(X)
        gap = float(np.mean(d))
        se = float(np.std(d, ddof=1) / np.sqrt(len(d)))

        def exact(m):
            return _gh_expect(lambda x: u.u(u.phi(lam * x)), c, m) - _gh_expect(alt, c, m)

        quad_err = abs(exact(n) - exact(2 * n))
        results.append(StressResult(beta, float(scale), gap, se, quad_err))
    return results
