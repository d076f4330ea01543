"""Command line entry point: ``simulate | optimize | verify | report``.

The run configuration is a YAML file with the blocks ``market``, ``time``,
``mc``, ``objective``, ``checks`` and ``output`` (see ``default_config.yaml``
for every field).  Steps may be written as fractions, e.g. ``delta_s: 1/48``.
Flags ``--seed``, ``--paths`` and ``--dt`` override the file.  The exit code is
0 iff every enabled check passed.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np
import yaml

from . import checks as ck
from .errors import BondOptError, FactorCountMismatch, ParseError, ValidationError
from .market import (
    CappedLinearVolatility,
    FactorVolatility,
    HumpedVolatility,
    MarketPriceOfRisk,
    PolynomialVolatility,
    TimeGrid,
    flat_curve,
    iter_batches,
    nelson_siegel_curve,
    simulate_batch,
    tabulated_curve,
)
from .optimizer import hedge_plan, make_plan, make_utility, optimal_terminal_wealth
from .portfolio import accumulate_gains

COMMANDS = ("simulate", "optimize", "verify", "report")

SCHEMA = {
    "market": {
        "grid": {"s_max": float, "delta_s": float},
        "initial_curve": dict,
        "volatility": list,
        "gamma": list,
    },
    "time": {"t_bar": float, "delta_t": float},
    "mc": {"paths": int, "base_seed": int, "chunk": int, "workers": int},
    "objective": {"utility": str, "mu": float, "K0": float, "discounting_mode": str},
    "checks": dict,
    "output": {"export_paths": int, "curve_stride": int},
}

SUITE_NAMES = tuple(ck.SUITES)


class StageError(BondOptError):
    """A module error raised while running one stage of a command."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


# --- config -----------------------------------------------------------------------


def _node_lines(node, prefix="", out=None):
    """Dotted field path -> 1-based source line, from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _node_lines(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = f"{prefix}[{i}]"
            out[key] = v.start_mark.line + 1
            _node_lines(v, key, out)
    return out


def _number(value, field_name, lines, kind=float):
    if isinstance(value, bool):
        raise ParseError(f"expected a number, got {value!r}", lines.get(field_name), field_name)
    if isinstance(value, str):
        try:
            value = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"expected a number or fraction, got {value!r}", lines.get(field_name), field_name)
    if kind is int:
        if not float(value).is_integer():
            raise ParseError(f"expected an integer, got {value!r}", lines.get(field_name), field_name)
        return int(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"expected a number, got {value!r}", lines.get(field_name), field_name)


@dataclass
class RunConfig:
    """Validated run configuration (plain data; models are built on demand)."""

    market: dict
    time: dict
    mc: dict
    objective: dict
    checks: dict
    output: dict
    source: str = "<default>"
    lines: dict = field(default_factory=dict, repr=False)

    # builders
    def curve_fn(self):
        params = dict(self.market["initial_curve"])
        fam = params.pop("family")
        if fam == "flat":
            return flat_curve(params["r0"])
        if fam == "nelson_siegel":
            return nelson_siegel_curve(params["beta0"], params["beta1"], params["beta2"], params["tau"])
        return tabulated_curve(params["maturities"], params["prices"])

    def volatility(self) -> FactorVolatility:
        facs = []
        for f in self.market["volatility"]:
            if f["family"] == "humped":
                facs.append(HumpedVolatility(f["alpha"], f["beta"]))
            elif f["family"] == "capped_linear":
                facs.append(CappedLinearVolatility(f["alpha"], f["s_cap"]))
            else:
                facs.append(PolynomialVolatility(tuple(f["coeffs"])))
        return FactorVolatility(facs)

    def mpr(self) -> MarketPriceOfRisk:
        return MarketPriceOfRisk(self.market["gamma"])

    def utility(self):
        return make_utility(self.objective["utility"], self.objective.get("mu"))

    def scenario(self) -> ck.Scenario:
        ref = self.checks.get("refinement", {})
        return ck.Scenario(
            self.curve_fn(),
            self.volatility(),
            self.mpr(),
            s_max=self.market["grid"]["s_max"],
            delta=self.time["delta_t"],
            t_bar=self.time["t_bar"],
            refine_s_max=ref.get("s_max", min(self.market["grid"]["s_max"], self.time["t_bar"] + 3.0)),
            coarse_delta=ref.get("coarse_delta", 1 / 12),
            utilities=[(self.utility(), self.objective["K0"])] + [
                (make_utility(u["utility"], u.get("mu")), u["K0"]) for u in self.checks.get("utilities", [])
            ],
            base_seed=self.mc["base_seed"],
        )

    def model(self):
        sc = self.scenario()
        return sc.model(), sc.time_grid()

    def as_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in SCHEMA}


def default_config_text() -> str:
    return resources.files("bondopt").joinpath("default_config.yaml").read_text()


def load_config(path=None, text: str | None = None) -> RunConfig:
    """Parse and validate a run configuration file.

    Raises :class:`ParseError` (with line and field) for malformed input and
    :class:`ValidationError` naming the violated invariant.
    """
    source = "<text>" if text is not None else (path or "<default>")
    if text is None:
        if path is None:
            text = default_config_text()
        else:
            try:
                with open(path) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ParseError(f"cannot read config: {exc}") from exc
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"malformed YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a mapping of named blocks", 1)
    lines = _node_lines(node)
    return _validate(data, lines, str(source))


def _check_keys(block: dict, allowed, prefix, lines):
    for k in block:
        if k not in allowed:
            name = f"{prefix}.{k}"
            raise ParseError(f"unknown field {k!r}", lines.get(name), name)


def _validate(data: dict, lines: dict, source: str) -> RunConfig:
    _check_keys(data, SCHEMA, "", {k.lstrip("."): v for k, v in lines.items()})
    for block in ("market", "time", "objective"):
        if block not in data:
            raise ParseError(f"missing block {block!r}", None, block)
    blocks = {k: dict(data.get(k) or {}) for k in SCHEMA}
    for name, b in blocks.items():
        if not isinstance(data.get(name, {}) or {}, dict):
            raise ParseError("block must be a mapping", lines.get(name), name)

    m = blocks["market"]
    _check_keys(m, SCHEMA["market"], "market", lines)
    grid = dict(m.get("grid") or {})
    _check_keys(grid, SCHEMA["market"]["grid"], "market.grid", lines)
    s_max = _number(grid.get("s_max"), "market.grid.s_max", lines)
    delta_s = _number(grid.get("delta_s"), "market.grid.delta_s", lines)
    if not (delta_s > 0 and s_max > 0):
        raise ValidationError("s_max and delta_s must be positive", "market.grid")
    k = s_max / delta_s
    if abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise ValidationError("s_max must be an integer multiple of delta_s", "market.grid.s_max")

    t = blocks["time"]
    _check_keys(t, SCHEMA["time"], "time", lines)
    t_bar = _number(t.get("t_bar"), "time.t_bar", lines)
    delta_t = _number(t.get("delta_t", delta_s), "time.delta_t", lines)
    if abs(delta_t - delta_s) > 1e-12 * delta_s:
        raise ValidationError(f"delta_t={delta_t:g} must equal delta_s={delta_s:g}", "time.delta_t")
    if not t_bar > 0:
        raise ValidationError("t_bar must be positive", "time.t_bar")
    TimeGrid(t_bar, delta_t)

    curve = dict(m.get("initial_curve") or {})
    fam = curve.get("family")
    params = {"flat": ("r0",), "nelson_siegel": ("beta0", "beta1", "beta2", "tau"), "tabulated": ("maturities", "prices")}
    if fam not in params:
        raise ValidationError(f"unknown initial curve family {fam!r}", "market.initial_curve.family")
    _check_keys(curve, ("family",) + params[fam], "market.initial_curve", lines)
    for p in params[fam]:
        if p not in curve:
            raise ValidationError(f"missing parameter {p!r}", f"market.initial_curve.{p}")
        name = f"market.initial_curve.{p}"
        if fam == "tabulated":
            curve[p] = [_number(v, f"{name}[{i}]", lines) for i, v in enumerate(curve[p])]
        else:
            curve[p] = _number(curve[p], name, lines)

    vols = m.get("volatility") or []
    if not isinstance(vols, list) or not vols:
        raise ValidationError("volatility must be a non-empty list of factors", "market.volatility")
    vparams = {"humped": ("alpha", "beta"), "capped_linear": ("alpha", "s_cap"), "polynomial": ("coeffs",)}
    clean = []
    for i, f in enumerate(vols):
        name = f"market.volatility[{i}]"
        if not isinstance(f, dict) or f.get("family") not in vparams:
            raise ValidationError(f"unknown volatility family {f.get('family') if isinstance(f, dict) else f!r}", name)
        _check_keys(f, ("family",) + vparams[f["family"]], name, lines)
        g = {"family": f["family"]}
        for p in vparams[f["family"]]:
            if p not in f:
                raise ValidationError(f"missing parameter {p!r}", f"{name}.{p}")
            if p == "coeffs":
                g[p] = [_number(v, f"{name}.coeffs[{j}]", lines) for j, v in enumerate(f[p])]
            else:
                g[p] = _number(f[p], f"{name}.{p}", lines)
        clean.append(g)
    gamma = m.get("gamma")
    if not isinstance(gamma, list):
        raise ValidationError("gamma must be a list with one value per factor", "market.gamma")
    gamma = [_number(v, f"market.gamma[{i}]", lines) for i, v in enumerate(gamma)]
    if len(gamma) != len(clean):
        raise ValidationError(f"{len(gamma)} risk prices for {len(clean)} volatility factors", "market.gamma")
    market = {"grid": {"s_max": s_max, "delta_s": delta_s}, "initial_curve": curve, "volatility": clean, "gamma": gamma}

    mc = blocks["mc"]
    _check_keys(mc, SCHEMA["mc"], "mc", lines)
    mc = {
        "paths": _number(mc.get("paths", 10_000), "mc.paths", lines, int),
        "base_seed": _number(mc.get("base_seed", 2024), "mc.base_seed", lines, int),
        "chunk": _number(mc.get("chunk", 1000), "mc.chunk", lines, int),
        "workers": _number(mc.get("workers", 1), "mc.workers", lines, int),
    }
    if mc["paths"] < 2 or mc["chunk"] < 1 or mc["workers"] < 1:
        raise ValidationError("paths >= 2, chunk >= 1 and workers >= 1 are required", "mc")

    ob = blocks["objective"]
    _check_keys(ob, SCHEMA["objective"], "objective", lines)
    kind = ob.get("utility")
    if kind not in ("quadratic", "exponential", "power", "log"):
        raise ValidationError(f"unknown utility {kind!r}", "objective.utility")
    objective = {
        "utility": kind,
        "mu": None if kind == "log" else _number(ob.get("mu"), "objective.mu", lines),
        "K0": _number(ob.get("K0"), "objective.K0", lines),
        "discounting_mode": ob.get("discounting_mode", "discounted"),
    }
    if objective["discounting_mode"] not in ("discounted", "terminal"):
        raise ValidationError("discounting_mode must be 'discounted' or 'terminal'", "objective.discounting_mode")
    u = make_utility(kind, objective["mu"])
    if not objective["K0"] > u.x_floor:
        raise ValidationError(f"K0={objective['K0']:g} must exceed the utility's lower endpoint {u.x_floor:g}",
                              "objective.K0")

    chk = _validate_checks(blocks["checks"], lines)
    out = blocks["output"]
    _check_keys(out, SCHEMA["output"], "output", lines)
    output = {
        "export_paths": _number(out.get("export_paths", 1), "output.export_paths", lines, int),
        "curve_stride": _number(out.get("curve_stride", 1), "output.curve_stride", lines, int),
    }

    referenced = max(chk.get("max_maturity", 3.0), 0.0)
    if s_max < t_bar + referenced - 1e-12:
        raise ValidationError(
            f"s_max={s_max:g} must cover t_bar + largest referenced maturity = {t_bar + referenced:g}", "market.grid.s_max"
        )
    cfg = RunConfig(market, {"t_bar": t_bar, "delta_t": delta_t}, mc, objective, chk, output, source, lines)
    try:
        cfg.volatility()
        cfg.scenario().model()
    except FactorCountMismatch as exc:
        raise ValidationError(str(exc), "market.gamma") from exc
    except ValidationError as exc:
        if exc.field and exc.field.split(".")[0].split("[")[0] in ("volatility", "initial_curve"):
            msg = str(exc)[len(exc.field) + 2:]
            raise ValidationError(msg, "market." + exc.field) from exc
        raise
    return cfg


def _validate_checks(chk: dict, lines: dict) -> dict:
    allowed = set(SUITE_NAMES) | {"suites", "refinement", "utilities", "max_maturity"}
    _check_keys(chk, allowed, "checks", lines)
    suites = chk.get("suites", "all")
    if suites == "all":
        suites = list(SUITE_NAMES)
    if not isinstance(suites, list):
        raise ValidationError("suites must be 'all' or a list", "checks.suites")
    for s in suites:
        if s not in SUITE_NAMES:
            raise ValidationError(f"unknown check suite {s!r}", "checks.suites")
    out = {"suites": suites}
    for name in SUITE_NAMES:
        params = chk.get(name) or {}
        if not isinstance(params, dict):
            raise ValidationError("suite parameters must be a mapping", f"checks.{name}")
        out[name] = {k: (_number(v, f"checks.{name}.{k}", lines) if not isinstance(v, (list, dict)) else v)
                     for k, v in params.items()}
        for k in ("paths", "n_paths", "levels", "n", "n_payoffs", "n_samples", "chunk"):
            if k in out[name]:
                out[name][k] = int(out[name][k])
    ref = chk.get("refinement") or {}
    out["refinement"] = {k: _number(v, f"checks.refinement.{k}", lines) for k, v in ref.items()}
    utils = chk.get("utilities") or []
    for i, u in enumerate(utils):
        make_utility(u.get("utility"), u.get("mu"))
    out["utilities"] = utils
    out["max_maturity"] = _number(chk.get("max_maturity", 3.0), "checks.max_maturity", lines)
    return out


def apply_overrides(cfg: RunConfig, seed=None, paths=None, dt=None) -> RunConfig:
    data = cfg.as_dict()
    if seed is not None:
        data["mc"]["base_seed"] = int(seed)
    if paths is not None:
        data["mc"]["paths"] = int(paths)
    if dt is not None:
        dt = float(Fraction(str(dt)))
        data["market"]["grid"]["delta_s"] = dt
        data["time"]["delta_t"] = dt
    return _validate(data, {}, cfg.source)


# --- output -----------------------------------------------------------------------


def emit_csv(series, path, header) -> str:
    """Write ``header`` and rows with 17 significant digits (exact round-trip)."""
    rows = np.asarray(series, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if rows.size:
            rows = rows.reshape(-1, len(header))
            for r in rows:
                fh.write(",".join("%.17g" % v for v in r) + "\n")
    return str(path)


@dataclass
class RunReport:
    command: str
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        lines = [f"command: {self.command}"]
        for k, v in self.notes.items():
            lines.append(f"{k}: {v}")
        lines.append("[checks]")
        lines.extend(c.line() for c in self.checks)
        lines.append("[files]")
        lines.extend(os.path.basename(f) for f in self.files)
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"summary: {n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except BondOptError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc


def _simulate(cfg: RunConfig, out: str, report: RunReport):
    model, tg = cfg.model()
    n_exp = min(cfg.output["export_paths"], cfg.mc["paths"])
    batch = _stage("market.simulate_exact", simulate_batch, model, tg, n_exp, cfg.mc["base_seed"])
    stride = cfg.output["curve_stride"]
    N = model.grid.n_points
    for i in range(n_exp):
        rows = []
        for k in range(0, tg.n_steps + 1, stride):
            s = model.grid.nodes[: N - k]
            rows.append(np.column_stack([np.full(s.shape, tg.times[k]), s, batch.pbar[i, k, : N - k]]))
        report.files.append(emit_csv(np.vstack(rows), os.path.join(out, f"curves_path{i}.csv"), ["t", "S", "pbar"]))
    pos = all(np.all(batch[i].curve(k).values > 0) for i in range(n_exp) for k in range(tg.n_steps + 1))
    report.checks.append(ck.CheckResult("simulate/positivity", float(pos), 1.0, pos, f"{n_exp} exported paths"))


def _optimize_chunk(cfg_dict, start, stop):
    cfg = _validate(cfg_dict, {}, "<worker>")
    model, tg = cfg.model()
    plan = make_plan(cfg.utility(), cfg.objective["K0"], model, tg)
    batch = simulate_batch(model, tg, range(start, stop), cfg.mc["base_seed"])
    st = hedge_plan(plan, model, batch)
    led = accumulate_gains(st, batch)
    ex = st.extras
    xT = optimal_terminal_wealth(plan, batch.xi[:, -1])
    dist = np.column_stack([batch.paths, batch.xi[:, -1], batch.pbar[:, -1, 0], xT, led.vbar[:, -1],
                            cfg.objective["K0"] + led.gbar[:, -1]])
    return ex["a"], ex["b"], ex["Y"], dist


def _map_chunks(cfg: RunConfig, fn):
    n, chunk, workers = cfg.mc["paths"], cfg.mc["chunk"], cfg.mc["workers"]
    spans = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    data = cfg.as_dict()
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(fn, [data] * len(spans), *zip(*spans)))
    return [fn(data, s, e) for s, e in spans]


def _optimize(cfg: RunConfig, out: str, report: RunReport):
    model, tg = cfg.model()
    u, K0 = cfg.utility(), cfg.objective["K0"]
    q = [0.05, 0.5, 0.95]
    if cfg.objective["discounting_mode"] == "terminal":
        xs, rows = [], []
        for batch in iter_batches(model, tg, cfg.mc["paths"], cfg.mc["base_seed"], cfg.mc["chunk"]):
            xs.append(batch.xi[:, -1] * batch.pbar[:, -1, 0])
            rows.append(np.column_stack([batch.paths, batch.xi[:, -1], batch.pbar[:, -1, 0]]))
        samples = np.concatenate(xs)
        plan = _stage("optimizer.solve_lambda", make_plan, u, K0, model, tg, "terminal", samples=samples)
        dist = np.vstack(rows)
        xT = optimal_terminal_wealth(plan, dist[:, 1], dist[:, 2])
        budget = float(np.mean(samples * xT))
        report.notes["lambda"] = "%.17g" % plan.lam
        report.files.append(emit_csv(np.column_stack([dist, xT]), os.path.join(out, "wealth_distribution.csv"),
                                     ["path", "xi_T", "pbar_T0", "X_opt"]))
        report.checks.append(ck.CheckResult("optimize/budget", abs(budget - K0), 1e-8 * max(1, abs(K0)),
                                            abs(budget - K0) <= 1e-8 * max(1, abs(K0)), "sample-average budget"))
        return
    plan = _stage("optimizer.solve_lambda", make_plan, u, K0, model, tg)
    report.notes["lambda"] = "%.17g" % plan.lam
    parts = _stage("optimizer.hedge_plan", _map_chunks, cfg, _optimize_chunk)
    a = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    Y = np.concatenate([p[2] for p in parts])
    dist = np.vstack([p[3] for p in parts])
    plan_rows = np.column_stack([tg.times, a.mean(0), b.mean(0), Y.mean(0), *np.quantile(Y, q, axis=0)])
    report.files.append(emit_csv(plan_rows, os.path.join(out, "plan.csv"),
                                 ["t", "a_mean", "b_mean", "Y_mean", "Y_q05", "Y_q50", "Y_q95"]))
    report.files.append(emit_csv(dist, os.path.join(out, "wealth_distribution.csv"),
                                 ["path", "xi_T", "pbar_T0", "X_opt", "V_T", "K0_plus_G_T"]))
    b0 = simulate_batch(model, tg, [0], cfg.mc["base_seed"])
    led = accumulate_gains(hedge_plan(plan, model, b0), b0)
    rows = np.column_stack([led.t, led.vbar[0], led.gbar[0], led.loadings[0]])
    report.files.append(emit_csv(rows, os.path.join(out, "ledger_path0.csv"),
                                 ["t", "vbar", "gbar"] + [f"loading_{i + 1}" for i in range(model.d)]))
    from .measure import lognormal_expect
    budget = lognormal_expect(lambda x: x * u.phi(plan.lam * x), plan.risk.total, plan.n_nodes)
    err = abs(budget - K0) / max(1.0, abs(K0))
    report.checks.append(ck.CheckResult("optimize/budget", err, 1e-8, err <= 1e-8, "quadrature budget identity"))
    xiT = dist[:, 1]
    m = xiT * dist[:, 4]
    se = float(np.std(m, ddof=1) / np.sqrt(len(m)))
    dev = abs(float(np.mean(m)) - K0)
    report.checks.append(ck.CheckResult("optimize/martingale", dev, 3 * se, dev <= 3 * se,
                                        f"xi-weighted mean of the hedge's terminal value, se={se:.3g}"))


def _verify(cfg: RunConfig, report: RunReport):
    sc = cfg.scenario()
    for name in cfg.checks["suites"]:
        params = dict(cfg.checks.get(name, {}))
        if name == "martingale":
            params.setdefault("n_paths", cfg.mc["paths"])
            params.setdefault("chunk", cfg.mc["chunk"])
        results = _stage(f"checks.{name}", ck.SUITES[name], sc, **params)
        report.checks.extend(results)


def run(config: RunConfig, command: str, out_dir: str) -> RunReport:
    """Execute one command and write its artifacts into ``out_dir``."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    os.makedirs(out_dir, exist_ok=True)
    report = RunReport(command, notes={"config": config.source, "seed": config.mc["base_seed"],
                                       "paths": config.mc["paths"], "delta_t": "%.17g" % config.time["delta_t"]})
    if command in ("simulate", "report"):
        _simulate(config, out_dir, report)
    if command in ("optimize", "report"):
        _optimize(config, out_dir, report)
    if command in ("verify", "report"):
        _verify(config, report)
    if command in ("verify", "report"):
        path = os.path.join(out_dir, "report.txt")
        report.files.append(path)
        with open(path, "w") as fh:
            fh.write(report.text())
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bondopt", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration (default: the shipped default config)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--dt", help="time and maturity step, e.g. 1/48")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.seed, args.paths, args.dt)
        report = run(cfg, args.command, args.out)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BondOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(report.text())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
