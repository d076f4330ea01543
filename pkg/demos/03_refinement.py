"""
Convergence under step refinement
=================================

Halving the step on a nested Brownian ladder.  The exact-vs-Euler strong
error and the hedge's replication error both shrink like sqrt(dt); the
short-end boundary error shrinks like dt.
"""

# %%
from bondopt import checks as ck

sc = ck.default_scenario()

for res in (ck.scheme_study(sc), ck.boundary_study(sc), *ck.replication_study(sc)):
    print(res.line())
