"""Verification suites shared by ``verify``/``report`` and the acceptance tests.

Every suite returns one or more :class:`CheckResult`.  Refinement studies
reuse one set of Brownian paths, aggregated from the finest level, so the
error sequence reflects the step size and not resampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .market import (
    CappedLinearVolatility,
    FactorVolatility,
    HumpedVolatility,
    MarketModel,
    MarketPriceOfRisk,
    TimeGrid,
    boundary_errors,
    build_model,
    iter_batches,
    nelson_siegel_curve,
    propagate,
    simulate_batch,
)
from .measure import RiskBudget, xi_path
from .optimizer import (
    clark_ocone_check,
    closed_form_lambda,
    closed_form_wealth,
    exponential_utility,
    feedback_ratio,
    hedge_plan,
    hjb_residual,
    make_plan,
    mutual_fund_decompose,
    optimality_stress,
    optimizer_functional,
    power_utility,
    quadratic_utility,
    reference_plan,
    solve_lambda,
    wealth_process,
)
from .portfolio import (
    accumulate_gains,
    buy_and_hold,
    fixed_atom,
    money_account,
    rollover_strategy,
    terminal_value,
)
from .streams import refinement_ladder


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: value={self.value:.6g} tol={self.tol:.6g} {self.detail}".rstrip()


@dataclass
class Scenario:
    """Market, horizon and objectives that a verification run works on."""

    curve_fn: Callable
    vol: FactorVolatility
    mpr: MarketPriceOfRisk
    s_max: float = 11.0
    delta: float = 1 / 48
    t_bar: float = 1.0
    refine_s_max: float = 4.0
    coarse_delta: float = 1 / 12
    utilities: list = field(default_factory=list)
    base_seed: int = 2024

    def model(self, delta: float | None = None, s_max: float | None = None) -> MarketModel:
        return build_model(self.curve_fn, self.vol, self.mpr, s_max or self.s_max, delta or self.delta)

    def time_grid(self, delta: float | None = None) -> TimeGrid:
        return TimeGrid(self.t_bar, delta or self.delta)

    def ladder(self, n_paths: int, levels: int, seed_offset: int = 0):
        coarse = int(round(self.t_bar / self.coarse_delta))
        deltas = [self.coarse_delta / 2**j for j in range(levels)]
        dws = refinement_ladder(self.base_seed + seed_offset, range(n_paths), self.vol.d, self.t_bar, coarse, levels)
        return deltas, dws


def default_utilities():
    return [(quadratic_utility(2.0), 1.0), (exponential_utility(1.0), 1.0), (power_utility(0.5), 1.0)]


def default_scenario() -> Scenario:
    vol = FactorVolatility([HumpedVolatility(0.02, 0.4), CappedLinearVolatility(0.005, 4.0)])
    return Scenario(
        nelson_siegel_curve(0.04, -0.01, 0.01, 2.0),
        vol,
        MarketPriceOfRisk([0.2, 0.1]),
        utilities=default_utilities(),
    )


def _orders(errs) -> np.ndarray:
    errs = np.asarray(errs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(errs[:-1] / errs[1:])


def _fitted_order(deltas, errs) -> float:
    """Least-squares slope of ``log err`` against ``log delta``."""
    return float(np.polyfit(np.log(deltas), np.log(errs), 1)[0])


def _common(a: np.ndarray, level: int) -> np.ndarray:
    """Restrict the time axis (last) of a level-``level`` array to the coarse grid."""
    return a[..., :: 2**level]


def _fmt(xs) -> str:
    return "[" + ", ".join(f"{x:.3g}" for x in xs) + "]"


# --- 1. martingale suite -------------------------------------------------------


def martingale_suite(sc: Scenario, n_paths: int = 100_000, chunk: int = 1000, s_roll: float = 2.0,
                     objective=None, n_se: float = 3.0) -> list:
    """ξ-weighted means of the terminal discounted value for a Roll-Over and the optimal hedge."""
    model, tg = sc.model(), sc.time_grid()
    u, K0 = objective or sc.utilities[0]
    plan = make_plan(u, K0, model, tg)
    plan.gamma_table()
    acc = {"rollover": [0.0, 0.0, None], "optimal": [0.0, 0.0, K0]}
    for batch in iter_batches(model, tg, n_paths, sc.base_seed, chunk):
        xi_T = batch.xi[:, -1]
        ro = rollover_strategy(s_roll, 1.0, batch)
        acc["rollover"][2] = float(ro.weights[0, 0] @ model.p0.values)
        st = hedge_plan(plan, model, batch)
        for key, v in (("rollover", terminal_value(ro, batch)), ("optimal", terminal_value(st, batch))):
            x = xi_T * v
            acc[key][0] += float(np.sum(x))
            acc[key][1] += float(np.sum(x * x))
    out = []
    for key, (s1, s2, v0) in acc.items():
        mean = s1 / n_paths
        se = math.sqrt(max(s2 / n_paths - mean**2, 0.0) / (n_paths - 1))
        dev = abs(mean - v0)
        out.append(CheckResult(
            f"martingale/{key}", dev, n_se * se, dev <= n_se * se,
            f"mean={mean:.8g} v0={v0:.8g} se={se:.3g} paths={n_paths}",
        ))
    return out


# --- 2. multiplier closed forms --------------------------------------------------


def lambda_closed_form(sc: Scenario, c_values=(0.0, 0.04, 0.25), tol: float = 1e-8) -> CheckResult:
    worst, where = 0.0, ""
    for u, K0 in sc.utilities:
        for c in c_values:
            lam = solve_lambda(u, K0, c)
            ref = closed_form_lambda(u, K0, c)
            err = abs(lam - ref) / abs(ref)
            if err >= worst:
                worst, where = err, f"{u.kind} c={c:g}"
    return CheckResult("lambda/closed-form", worst, tol, worst <= tol, f"worst at {where}")


# --- 3. wealth process -------------------------------------------------------------


def wealth_agreement(sc: Scenario, n_paths: int = 100, tol: float = 1e-8) -> CheckResult:
    model, tg = sc.model(), sc.time_grid()
    batch = simulate_batch(model, tg, n_paths, sc.base_seed + 3)
    dens = xi_path(model.gamma_table(tg)[:-1], batch.dW, tg.delta_t)
    worst, where = 0.0, ""
    for u, K0 in sc.utilities:
        plan = make_plan(u, K0, model, tg)
        y_q = wealth_process(plan, dens)
        y_c = closed_form_wealth(u, K0, dens.mq, dens.c)
        err = float(np.max(np.abs(y_q - y_c) / np.maximum(np.abs(y_c), 1e-300)))
        if err >= worst:
            worst, where = err, u.kind
    return CheckResult("wealth/closed-form", worst, tol, worst <= tol, f"worst utility {where}, {n_paths} paths")


# --- 4. replication -----------------------------------------------------------------


def replication_study(sc: Scenario, n_paths: int = 200, levels: int = 4, min_ratio: float = 2.0) -> list:
    """Pathwise ``|K0 + Gbar - Y|`` under step halving, one result per utility.

    The error measure is the path average of the pathwise maximum over the
    coarse time grid.
    """
    deltas, dws = sc.ladder(n_paths, levels, seed_offset=4)
    errs = {u.kind: [] for u, _ in sc.utilities}
    for j, (delta, dW) in enumerate(zip(deltas, dws)):
        model, tg = sc.model(delta, sc.refine_s_max), sc.time_grid(delta)
        batch = simulate_batch(model, tg, n_paths, 0, dW=dW)
        for u, K0 in sc.utilities:
            plan = make_plan(u, K0, model, tg)
            st = hedge_plan(plan, model, batch)
            led = accumulate_gains(st, batch)
            e = np.max(_common(np.abs(K0 + led.gbar - st.extras["Y"]), j), axis=-1)
            errs[u.kind].append(float(np.mean(e)))
    out = []
    for kind, e in errs.items():
        ratios = np.asarray(e[:-1]) / np.asarray(e[1:])
        exact = max(e) < 1e-12
        ok = exact or bool(np.all(ratios >= min_ratio))
        out.append(CheckResult(
            f"replication/{kind}", float(np.min(ratios)), min_ratio, ok,
            f"errors={_fmt(e)} ratios={_fmt(ratios)}" + (" (exact to machine precision)" if exact else ""),
        ))
    return out


# --- 5. loading identity ---------------------------------------------------------


def loading_identity(sc: Scenario, n_paths: int = 20, tol: float = 1e-8) -> CheckResult:
    model, tg = sc.model(), sc.time_grid()
    batch = simulate_batch(model, tg, n_paths, sc.base_seed + 5)
    gam = model.gamma_table(tg)
    worst, where = 0.0, ""
    for u, K0 in sc.utilities:
        plan = make_plan(u, K0, model, tg)
        st = hedge_plan(plan, model, batch)
        led = accumulate_gains(st, batch)
        target = st.extras["b"][..., None] * gam
        scale = np.max(np.abs(target), axis=(-1, -2), keepdims=True)
        err = float(np.max(np.abs(led.loadings - target) / scale))
        if err >= worst:
            worst, where = err, u.kind
    return CheckResult("loading/identity", worst, tol, worst <= tol, f"worst utility {where}")


# --- 6. boundary condition --------------------------------------------------------


def boundary_study(sc: Scenario, n_paths: int = 200, levels: int = 4, min_order: float = 1.0) -> CheckResult:
    """Boundary identity error under step halving, compared on the coarse time grid."""
    deltas, dws = sc.ladder(n_paths, levels, seed_offset=6)
    errs, consts = [], []
    for j, (delta, dW) in enumerate(zip(deltas, dws)):
        model, tg = sc.model(delta, sc.t_bar + 4 * sc.coarse_delta), sc.time_grid(delta)
        batch = simulate_batch(model, tg, n_paths, 0, dW=dW)
        e = float(np.mean(np.max(_common(boundary_errors(batch.pbar, delta), j), axis=-1)))
        errs.append(e)
        consts.append(e / delta)
    order = _fitted_order(deltas, errs)
    return CheckResult("boundary/order", order, min_order, order >= min_order,
                       f"errors={_fmt(errs)} step orders={_fmt(_orders(errs))} C={_fmt(consts)}")


# --- 7. exact vs Euler --------------------------------------------------------------


def scheme_study(sc: Scenario, n_paths: int = 400, levels: int = 5, min_order: float = 0.5,
                 s_span: float = 2.0) -> CheckResult:
    """Strong error ``max_S E|pbar_T^exact(S) - pbar_T^euler(S)|`` on shared increments.

    Maturities are the coarse-grid nodes in ``[0, s_span]``; the order is the
    least-squares slope of log error against log step.
    """
    deltas, dws = sc.ladder(n_paths, levels, seed_offset=7)
    errs = []
    for j, (delta, dW) in enumerate(zip(deltas, dws)):
        model, tg = sc.model(delta, sc.t_bar + s_span), sc.time_grid(delta)
        sig, drift = model.sigma_table(tg), model.drift_table(tg)
        ex, _ = propagate(model.p0.values, sig, drift, dW, delta, "exact")
        eu, _ = propagate(model.p0.values, sig, drift, dW, delta, "euler")
        n_s = int(round(s_span / delta)) + 1
        diff = np.abs(ex[:, -1, :n_s:2**j] - eu[:, -1, :n_s:2**j])
        errs.append(float(np.max(np.mean(diff, axis=0))))
    order = _fitted_order(deltas, errs)
    ok = order >= min_order and bool(np.all(np.diff(errs) < 0))
    return CheckResult("scheme/exact-vs-euler", order, min_order, ok,
                       f"errors={_fmt(errs)} step orders={_fmt(_orders(errs))}")


# --- 8. HJB -------------------------------------------------------------------------


def hjb_suite(sc: Scenario, n: int = 10, h: float = 1e-3, tol: float = 1e-4) -> list:
    model, tg = sc.model(), sc.time_grid()
    risk = RiskBudget.from_model(model, tg)
    ts = np.linspace(0.05, 0.95, n) * sc.t_bar
    out = []
    for u, K0 in sc.utilities:
        ws = np.linspace(0.5, 1.5, n) * max(1.0, abs(K0))
        T, Wl = np.meshgrid(ts, ws, indexing="ij")
        r = np.asarray(hjb_residual(u, risk, T, Wl, h, h, tol))
        out.append(CheckResult(f"hjb/{u.kind}", float(np.max(r)), tol, bool(np.max(r) <= tol),
                               f"{n}x{n} lattice, h={h:g}"))
    return out


def feedback_check(sc: Scenario, n_paths: int = 5, tol: float = 1e-5) -> CheckResult:
    """Hedge ``b_t`` against ``U_w / U_ww`` evaluated at ``w = Y(t)``."""
    model, tg = sc.model(), sc.time_grid()
    batch = simulate_batch(model, tg, n_paths, sc.base_seed + 8)
    worst = 0.0
    for u, K0 in sc.utilities:
        plan = make_plan(u, K0, model, tg)
        Y, b = plan.Y(None, batch.xi), plan.b(None, batch.xi)
        t = np.broadcast_to(tg.times, Y.shape)
        fb = feedback_ratio(u, plan.risk, t, Y)
        worst = max(worst, float(np.max(np.abs(fb - b) / np.maximum(np.abs(b), 1e-12))))
    return CheckResult("hjb/feedback", worst, tol, worst <= tol, "b_t vs U_w/U_ww at w=Y(t)")


# --- 9. Clark-Ocone -------------------------------------------------------------------


def clark_ocone_suite(sc: Scenario, n_paths: int = 2000, levels: int = 4, machine_tol: float = 1e-12,
                      min_ratio: float = 2.0) -> list:
    deltas, dws = sc.ladder(n_paths, levels, seed_offset=9)
    lin, sq = [], []
    own = {u.kind: [] for u, _ in sc.utilities}
    for delta, dW in zip(deltas, dws):
        risk = RiskBudget(sc.mpr.table(np.arange(dW.shape[1]) * delta), delta)
        lin.append(clark_ocone_check(lambda x: x, lambda x: np.ones_like(x), risk, dW)[0])
        sq.append(clark_ocone_check(lambda x: x**2, lambda x: 2 * x, risk, dW)[0])
        tg = sc.time_grid(delta)
        for u, K0 in sc.utilities:
            plan = make_plan(u, K0, sc.model(delta, sc.refine_s_max), tg)
            F, Fp = optimizer_functional(plan)
            own[u.kind].append(clark_ocone_check(F, Fp, plan.risk, dW)[0])
    out = [CheckResult("clark-ocone/linear", max(lin), machine_tol, max(lin) <= machine_tol, f"rms={_fmt(lin)}")]
    r = np.asarray(sq[:-1]) / np.asarray(sq[1:])
    out.append(CheckResult("clark-ocone/square", float(np.min(r)), min_ratio, bool(np.all(r >= min_ratio)),
                           f"rms={_fmt(sq)} ratios={_fmt(r)}"))
    for kind, e in own.items():
        dec = bool(np.all(np.diff(e) < 0)) or max(e) <= machine_tol
        out.append(CheckResult(f"clark-ocone/optimizer-{kind}", float(e[-1]), float(e[0]), dec,
                               f"rms={_fmt(e)} (monotone decrease or machine precision)"))
    return out


# --- 10. mutual fund -----------------------------------------------------------------


def mutual_fund_suite(sc: Scenario, n_paths: int = 10, tol: float = 1e-8) -> list:
    model, tg = sc.model(), sc.time_grid()
    batch = simulate_batch(model, tg, n_paths, sc.base_seed + 10)
    ref = reference_plan(model, tg)
    worst, min_fund = 0.0, math.inf
    for u, K0 in sc.utilities:
        plan = make_plan(u, K0, model, tg)
        own = hedge_plan(plan, model, batch)
        dec = mutual_fund_decompose(plan, ref, batch)
        a = accumulate_gains(own, batch)
        b = accumulate_gains(dec.reconstructed, batch)
        fv = accumulate_gains(dec.fund, batch).vbar
        min_fund = min(min_fund, float(np.min(fv)))
        sv = np.maximum(np.abs(a.vbar), 1e-300)
        sl = np.maximum(np.max(np.abs(a.loadings), axis=-1, keepdims=True), 1e-300)
        err = max(float(np.max(np.abs(a.vbar - b.vbar) / sv)), float(np.max(np.abs(a.loadings - b.loadings) / sl)))
        worst = max(worst, err)
    return [
        CheckResult("mutual-fund/reconstruction", worst, tol, worst <= tol, "value and loadings"),
        CheckResult("mutual-fund/positivity", min_fund, 0.0, min_fund > 0, "min <Theta_t, pbar_t>"),
    ]


# --- 11. optimality stress ----------------------------------------------------------


def optimality_suite(sc: Scenario, n_payoffs: int = 20, n_samples: int = 100_000) -> list:
    model, tg = sc.model(), sc.time_grid()
    out = []
    for u, K0 in sc.utilities:
        plan = make_plan(u, K0, model, tg)
        res = optimality_stress(plan, n_payoffs, n_samples, seed=sc.base_seed + 11)
        n_ok = sum(r.passed for r in res)
        worst = min(res, key=lambda r: r.gap - 3 * r.std_err - r.quad_err)
        out.append(CheckResult(
            f"optimality/{u.kind}", float(n_ok), float(n_payoffs), n_ok == len(res) == n_payoffs,
            f"worst beta={worst.beta:.3g} gap={worst.gap:.3g} se={worst.std_err:.3g} quad={worst.quad_err:.3g}",
        ))
    return out


# --- 12. self-financing classifier ------------------------------------------------


def self_financing_suite(sc: Scenario, n_paths: int = 200, levels: int = 4, small_tol: float = 1e-3,
                         s_roll: float = 2.0, t_bond: float = 3.0, s_fixed: float = 2.0) -> list:
    """Residuals of the Roll-Over, buy-and-hold, money account and fixed-atom portfolios."""
    deltas, dws = sc.ladder(n_paths, levels, seed_offset=12)
    names = ("rollover", "buy-and-hold", "money-account", "fixed-atom")
    res = {k: [] for k in names}
    for j, (delta, dW) in enumerate(zip(deltas, dws)):
        model, tg = sc.model(delta, sc.refine_s_max), sc.time_grid(delta)
        batch = simulate_batch(model, tg, n_paths, 0, dW=dW)
        strategies = (
            rollover_strategy(s_roll, 1.0, batch),
            buy_and_hold(t_bond, batch),
            money_account(1.0, batch),
            fixed_atom(s_fixed, batch),
        )
        for k, st in zip(names, strategies):
            led = accumulate_gains(st, batch)
            r = np.max(_common(np.abs(led.vbar - led.vbar[..., :1] - led.gbar), j), axis=-1)
            res[k].append(float(np.mean(r)))
    out = []
    largest_sf = 0.0
    for k in names[:3]:
        e = res[k]
        largest_sf = max(largest_sf, e[-1])
        shrinking = bool(np.all(np.diff(e) < 0)) or max(e) < 1e-12
        ok = shrinking and e[-1] <= small_tol
        out.append(CheckResult(f"self-financing/{k}", e[-1], small_tol, ok, f"residuals={_fmt(e)}"))
    e = res["fixed-atom"]
    not_shrinking = e[-1] >= 0.5 * e[0]
    big = e[-1] >= 10 * max(largest_sf, small_tol)
    out.append(CheckResult("self-financing/fixed-atom", e[-1], 10 * max(largest_sf, small_tol), not_shrinking and big,
                           f"residuals={_fmt(e)} (must stay order-1)"))
    return out


# --- invariants used by verify ----------------------------------------------------


def no_arbitrage_smoke(sc: Scenario, n_paths: int = 2000) -> CheckResult:
    """Zero-cost self-financing combinations must not dominate zero on the ensemble."""
    model, tg = sc.model(), sc.time_grid()
    batch = simulate_batch(model, tg, n_paths, sc.base_seed + 13)
    legs = [rollover_strategy(s, 1.0, batch) for s in (0.0, 1.0, 2.0, 5.0)] + [buy_and_hold(3.0, batch)]
    leds = [accumulate_gains(st, batch) for st in legs]
    found = 0
    for i in range(len(legs)):
        for j in range(len(legs)):
            if i == j:
                continue
            # long leg i, short leg j scaled to zero initial cost
            wj = leds[i].vbar[0, 0] / leds[j].vbar[0, 0]
            vT = (leds[i].vbar[:, 0] + leds[i].gbar[:, -1]) - wj * (leds[j].vbar[:, 0] + leds[j].gbar[:, -1])
            if np.min(vT) >= 0 and np.max(vT) > 0:
                found += 1
    return CheckResult("no-arbitrage/smoke", float(found), 0.0, found == 0, f"{len(legs)} legs, {n_paths} paths")


SUITES = {
    "martingale": martingale_suite,
    "lambda": lambda sc, **kw: [lambda_closed_form(sc, **kw)],
    "wealth": lambda sc, **kw: [wealth_agreement(sc, **kw)],
    "replication": replication_study,
    "loading": lambda sc, **kw: [loading_identity(sc, **kw)],
    "boundary": lambda sc, **kw: [boundary_study(sc, **kw)],
    "scheme": lambda sc, **kw: [scheme_study(sc, **kw)],
    "hjb": lambda sc, **kw: hjb_suite(sc, **kw) + [feedback_check(sc)],
    "clark_ocone": clark_ocone_suite,
    "mutual_fund": mutual_fund_suite,
    "optimality": optimality_suite,
    "self_financing": self_financing_suite,
    "no_arbitrage": lambda sc, **kw: [no_arbitrage_smoke(sc, **kw)],
}
