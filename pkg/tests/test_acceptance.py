"""Acceptance criteria at desk scale (d = 2, dt = dS = 1/48, T = 1, s_max = 11).

Each test runs one verification suite with the literal thresholds and records
a single PASS/FAIL line; the lines are printed in the terminal summary, or to
stdout when the file is run as a script.
"""

import sys

import pytest

from bondopt import checks as ck

RESULTS = {}

CRITERIA = [
    (1, "martingale", "martingale", {"n_paths": 100_000}),
    (2, "lambda closed form", "lambda", {"tol": 1e-8}),
    (3, "wealth closed form", "wealth", {"n_paths": 100, "tol": 1e-8}),
    (4, "replication halving", "replication", {"levels": 4, "min_ratio": 2.0}),
    (5, "loading identity", "loading", {"tol": 1e-8}),
    (6, "boundary order >= 1", "boundary", {"levels": 4, "min_order": 1.0}),
    (7, "scheme order >= 0.5", "scheme", {"levels": 5, "min_order": 0.5}),
    (8, "HJB residual", "hjb", {"n": 10, "h": 1e-3, "tol": 1e-4}),
    (9, "Clark-Ocone", "clark_ocone", {"levels": 4, "min_ratio": 2.0}),
    (10, "mutual fund", "mutual_fund", {"tol": 1e-8}),
    (11, "optimality stress", "optimality", {"n_payoffs": 20}),
    (12, "self-financing classifier", "self_financing", {"levels": 4}),
]


def _line(num, title, results):
    ok = all(r.passed for r in results)
    head = f"{'PASS' if ok else 'FAIL'} criterion {num:>2} ({title})"
    failed = [r.name for r in results if not r.passed]
    tail = f": {len(results) - len(failed)}/{len(results)} sub-checks" + (f", failing {failed}" if failed else "")
    return ok, head + tail


@pytest.fixture(scope="module")
def scenario():
    return ck.default_scenario()


def evaluate(num, title, suite, params, sc):
    results = ck.SUITES[suite](sc, **params)
    ok, line = _line(num, title, results)
    RESULTS[num] = (line, [r.line() for r in results])
    return ok, results


@pytest.mark.slow
@pytest.mark.parametrize("num,title,suite,params", CRITERIA, ids=[f"c{c[0]:02d}_{c[2]}" for c in CRITERIA])
def test_criterion(num, title, suite, params, scenario):
    ok, results = evaluate(num, title, suite, params, scenario)
    assert ok, "\n".join(r.line() for r in results if not r.passed)


if __name__ == "__main__":
    sc = ck.default_scenario()
    n_ok = 0
    for crit in CRITERIA:
        ok, _ = evaluate(*crit, sc)
        n_ok += ok
        line, details = RESULTS[crit[0]]
        print(line)
        for d in details:
            print("    " + d)
    print(f"{n_ok}/{len(CRITERIA)} criteria passed")
    sys.exit(0 if n_ok == len(CRITERIA) else 1)
