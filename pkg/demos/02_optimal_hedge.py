"""
Optimal bond portfolios and their hedge
=======================================

For quadratic, exponential and power utility we solve the budget multiplier,
hedge the optimal wealth with zero-coupon bonds along simulated paths, and
compare the hedge's gains with the target wealth process.
"""

# %%
import numpy as np

from bondopt.checks import default_scenario
from bondopt.market import simulate_batch
from bondopt.optimizer import closed_form_lambda, hedge_plan, make_plan, mutual_fund_decompose, reference_plan
from bondopt.portfolio import accumulate_gains

sc = default_scenario()
model, tg = sc.model(), sc.time_grid()
batch = simulate_batch(model, tg, 500, 7)

# %%
# Multipliers from quadrature against the closed forms.
for u, K0 in sc.utilities:
    plan = make_plan(u, K0, model, tg)
    print(f"{u.kind:12s} lam={plan.lam:.12f}  closed form={closed_form_lambda(u, K0, plan.risk.total):.12f}")

# %%
# Replication: K0 plus discounted gains should track Y(t).  Exponential utility
# has a constant risky coefficient, so its hedge is exact on the grid; the
# other two carry the usual discrete-rebalancing error.
for u, K0 in sc.utilities:
    plan = make_plan(u, K0, model, tg)
    st = hedge_plan(plan, model, batch)
    led = accumulate_gains(st, batch)
    err = np.abs(K0 + led.gbar - st.extras["Y"]).max(axis=1)
    print(f"{u.kind:12s} median max-error {np.median(err):.2e}   worst {err.max():.2e}")

# %%
# Every optimal hedge is cash plus a multiple of one reference fund.
plan = make_plan(*sc.utilities[0], model, tg)
fd = mutual_fund_decompose(plan, reference_plan(model, tg), batch[0])
print("fund weight y_t at t = 0, 0.5, 1:", fd.y[[0, tg.n_steps // 2, -1]].round(4))
