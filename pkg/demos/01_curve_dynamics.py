"""
Simulating discounted bond curves
=================================

A two-factor market on a monthly grid.  We simulate a few paths, look at how
the discounted curve ages along a path, and check two facts that hold for
every admissible market: the density-weighted curve is unbiased for the
shifted initial curve, and the exact and Euler schemes agree as the step
shrinks.
"""

# %%
import numpy as np

from bondopt.checks import default_scenario
from bondopt.market import simulate_batch, simulate_euler, simulate_exact

sc = default_scenario()
model = sc.model(delta=1 / 12, s_max=6.0)
tg = sc.time_grid(1 / 12)
print(model.grid, tg)

# %%
# One path: the discounted curve loses a node per step (the bond maturing at
# S = dt is cashed in), and its short end tracks the money account.
path = simulate_exact(model, tg, (2024, 0))
for k in (0, 6, 12):
    c = path.curve(k)
    print(f"t={tg.times[k]:.2f}  pbar(0)={c.values[0]:.5f}  pbar(2)={c(2.0):.5f}  nodes={c.grid.n_points}")

# %%
# Under P the density-weighted discounted price is a martingale, so its mean
# at T equals the initial curve shifted by T.
batch = simulate_batch(model, tg, 20_000, 2024)
k = tg.n_steps
w = batch.xi[:, -1, None] * batch.pbar[:, k, : model.grid.n_points - k]
se = w.std(0, ddof=1) / np.sqrt(len(w))
z = (w.mean(0) - model.p0.values[k:]) / se
print("max |z-score| over maturities:", np.abs(z).max().round(2))

# %%
# The same increments pushed through the Euler reaction step.
ex, eu = simulate_exact(model, tg, 5), simulate_euler(model, tg, 5)
print("max |exact - euler| on this path:", np.nanmax(np.abs(ex.pbar - eu.pbar)))
