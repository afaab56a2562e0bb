"""
=========================================
How fast do the three proposals mix?
=========================================

Start chains from random orderings and track how long each takes to reach
the score of the MAP DAG under the true ordering.  Time is measured in
effective iterations: the number of nodewise selections paid so far.
"""

# %%
# Setup
# -----

import numpy as np

from eqdag import ChainConfig, Ordering, SelectionCache, preset, run_chain, simulate
from eqdag.graph import KINDS

data = simulate(preset("mixing")).data
cache = SelectionCache(data)
target = cache.score(*cache.select(Ordering.identity(data.p)))
print(f"target score {target:.2f}")

# %%
# Race
# ----
# Five chains per proposal, each capped at 10,000 effective iterations.

for kind in KINDS:
    first_hit = []
    for seed in range(5):
        out = run_chain(ChainConfig(iterations=10_000, burn_in=0, seed=seed, init="random",
                                    neighborhood=kind, max_effective=10_000,
                                    compute_pip=False), data, cache=cache)
        reached = np.flatnonzero(out.trace["log_score"] >= target - 1e-12 * abs(target))
        first_hit.append(int(out.trace["effective_cum"][reached[0]]) if reached.size else None)
    print(f"{kind:>13}: effective iterations to target {first_hit}")
