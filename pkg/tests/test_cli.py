import filecmp
import os

import numpy as np
import pytest

from bondopt.cli import StageError, apply_overrides, emit_csv, load_config, main, run
from bondopt.errors import ParseError, ValidationError

MINIMAL = """
market:
  grid: {s_max: 5, delta_s: 1/12}
  initial_curve: {family: flat, r0: 0.03}
  volatility:
    - {family: humped, alpha: 0.015, beta: 0.5}
  gamma: [0.25]
time: {t_bar: 1, delta_t: 1/12}
mc: {paths: 40, base_seed: 9, chunk: 16}
objective: {utility: power, mu: 0.5, K0: 1.0}
checks:
  suites: [lambda, wealth, loading, mutual_fund]
  wealth: {n_paths: 10}
output: {export_paths: 1}
"""


def test_minimal_config_valid():
    cfg = load_config(text=MINIMAL)
    assert cfg.time["delta_t"] == pytest.approx(1 / 12)
    assert cfg.market["volatility"][0]["family"] == "humped"


def test_default_config_loads():
    cfg = load_config()
    assert cfg.mc["paths"] == 100_000
    assert cfg.market["grid"]["s_max"] == 11


@pytest.mark.parametrize("old,new,field", [
    ("delta_t: 1/12", "delta_t: 1/24", "time.delta_t"),
    ("mu: 0.5", "mu: 1.5", "objective.mu"),
    ("K0: 1.0", "K0: 0.0", "objective.K0"),
    ("s_max: 5", "s_max: 3", "market.grid.s_max"),
    ("gamma: [0.25]", "gamma: [0.25, 0.1]", "market.gamma"),
])
def test_invalid_configs(old, new, field):
    with pytest.raises(ValidationError) as exc:
        load_config(text=MINIMAL.replace(old, new))
    assert exc.value.field == field


def test_sigma_boundary_violation_named():
    text = MINIMAL.replace("{family: humped, alpha: 0.015, beta: 0.5}", "{family: polynomial, coeffs: [0.01, 0.001]}")
    with pytest.raises(ValidationError, match="sigma family violates sigma\\(t,0\\)=0"):
        load_config(text=text)


def test_parse_error_has_line_and_field():
    with pytest.raises(ParseError) as exc:
        load_config(text=MINIMAL.replace("chunk: 16", "chunk: 16, colour: red"))
    assert exc.value.field == "mc.colour"
    assert exc.value.line == 9
    with pytest.raises(ParseError) as exc:
        load_config(text=MINIMAL.replace("r0: 0.03", "r0: three"))
    assert exc.value.field == "market.initial_curve.r0"


def test_emit_csv_header_only_and_round_trip(tmp_path):
    p = emit_csv(np.empty((0, 3)), tmp_path / "e.csv", ["t", "S", "pbar"])
    assert open(p).read() == "t,S,pbar\n"
    x = np.random.default_rng(1).normal(size=(20, 3)) * 10.0 ** np.arange(-5, 10, 5)
    emit_csv(x, tmp_path / "r.csv", ["a", "b", "c"])
    back = np.loadtxt(tmp_path / "r.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back, x)


def test_simulate_panel_row_major(tmp_path):
    cfg = load_config(text=MINIMAL)
    run(cfg, "simulate", str(tmp_path))
    data = np.loadtxt(tmp_path / "curves_path0.csv", delimiter=",", skiprows=1)
    t, s = data[:, 0], data[:, 1]
    assert np.all(np.diff(t) >= 0)
    first = t == 0
    np.testing.assert_allclose(data[first, 2], np.exp(-0.03 * s[first]), rtol=1e-14)


def test_same_seed_byte_identical(tmp_path):
    cfg = load_config(text=MINIMAL)
    for d in ("a", "b"):
        run(cfg, "optimize", str(tmp_path / d))
    for name in ("plan.csv", "wealth_distribution.csv", "ledger_path0.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)


def test_worker_pool_matches_serial(tmp_path):
    cfg = load_config(text=MINIMAL)
    run(cfg, "optimize", str(tmp_path / "s"))
    cfg_p = load_config(text=MINIMAL.replace("chunk: 16", "chunk: 16, workers: 2"))
    run(cfg_p, "optimize", str(tmp_path / "p"))
    assert filecmp.cmp(tmp_path / "s" / "plan.csv", tmp_path / "p" / "plan.csv", shallow=False)


def test_lambda_path_count_invariant(tmp_path):
    cfg = load_config(text=MINIMAL)
    r10 = run(apply_overrides(cfg, paths=10), "optimize", str(tmp_path / "a"))
    r40 = run(cfg, "optimize", str(tmp_path / "b"))
    assert r10.notes["lambda"] == r40.notes["lambda"]


def test_verify_report_lists_each_check_once(tmp_path):
    rep = run(load_config(text=MINIMAL), "verify", str(tmp_path))
    names = [c.name for c in rep.checks]
    assert len(names) == len(set(names))
    assert rep.passed
    assert "summary:" in open(tmp_path / "report.txt").read()


def test_errors_tagged_with_stage(tmp_path):
    cfg = load_config(text=MINIMAL.replace("suites: [lambda, wealth, loading, mutual_fund]", "suites: [martingale]"))
    cfg.checks["martingale"] = {"n_paths": 8, "s_roll": 4.5}
    with pytest.raises(StageError) as exc:
        run(cfg, "verify", str(tmp_path))
    assert exc.value.stage == "checks.martingale"
    assert "GridExhausted" in str(exc.value)


def test_main_exit_codes(tmp_path):
    cfgf = tmp_path / "c.yaml"
    cfgf.write_text(MINIMAL)
    assert main(["verify", "--config", str(cfgf), "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("mu: 0.5", "mu: 1.5"))
    assert main(["optimize", "--config", str(bad), "--out", str(tmp_path / "o2")]) == 2
    assert not os.path.exists(tmp_path / "o2")
    assert main(["simulate", "--config", str(cfgf), "--out", str(tmp_path / "o3"), "--dt", "1/6", "--paths", "3"]) == 0
