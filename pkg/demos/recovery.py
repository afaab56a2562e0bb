"""
=====================================
Recovering a DAG from simulated data
=====================================

Simulate a sparse equal-variance SEM, warm-start the order sampler with the
iterated top-down estimate, and compare the edge probabilities with the truth.
"""

# %%
# Simulate
# --------
# Forty nodes, about thirty edges, weights of magnitude 0.3 to 1.

import numpy as np

from eqdag import ChainConfig, metrics, preset, run_chain, simulate

truth = simulate(preset("uniform-strong", seed=3))
print(truth.dag.edge_count, "true edges")

# %%
# Sample
# ------
# 3000 iterations of adjacent transpositions, the first half discarded.

out = run_chain(ChainConfig(iterations=3000, seed=3), truth.data)
print("warm start took", out.warm_start.outer_iterations, "top-down passes")
print(f"acceptance rate {out.acceptance_rate:.2f}")

# %%
# Score the estimate
# ------------------
# The Rao-Blackwellized edge probabilities go straight into the metrics;
# thresholding at one half gives a hard graph.

soft = metrics(truth.dag.adjacency(), out.pip)
hard = metrics(truth.dag.adjacency(), out.pip, threshold=0.5)
print("soft:", soft)
print("hard:", hard)

missed = np.argwhere((truth.dag.adjacency() == 1) & (out.pip <= 0.5))
print("edges missed at 0.5:", [(i + 1, j + 1) for i, j in missed])
