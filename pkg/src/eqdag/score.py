"""Posterior scores of Gaussian DAG models, all in log domain.

``phi`` is the equal-variance score, which couples the nodes through the
log of the *total* residual sum of squares.  ``phi_decomposable`` is the
score-equivalent baseline that sums per-node log RSS terms instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .graph import Dag

NONDECOMPOSABLE = "nondecomposable"
DECOMPOSABLE = "decomposable"
SCORE_KINDS = (NONDECOMPOSABLE, DECOMPOSABLE)


class ScoreError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    """Prior hyperparameters.

    ``d_in=None`` resolves to ``min(p - 1, 10)`` once ``p`` is known.
    """

    c0: float = 3.0
    alpha: float = 0.99
    gamma: float = 0.01
    kappa: float = 0.0
    d_in: int | None = None

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.kappa >= 0:
            raise ValueError("kappa must be non-negative")
        if self.d_in is not None and self.d_in < 1:
            raise ValueError("d_in must be a positive integer")

    def resolve(self, p: int) -> "Hyperparams":
        d = min(p - 1, 10) if self.d_in is None else min(self.d_in, p - 1)
        return replace(self, d_in=d)

    def edge_penalty(self, p: int) -> float:
        """Log-score cost of one edge: ``c0 log p + log(1 + alpha/gamma) / 2``."""
        return self.c0 * math.log(p) + 0.5 * math.log1p(self.alpha / self.gamma)

    def rss_weight(self, n: int, p: int, kind: str = NONDECOMPOSABLE) -> float:
        if kind == DECOMPOSABLE:
            return 0.5 * (self.alpha * n + self.kappa)
        return 0.5 * (self.alpha * p * n + self.kappa)


@dataclass
class ScoreState:
    rss_by_node: np.ndarray
    edge_count: int
    total_rss: float = 0.0

    def __post_init__(self):
        self.rss_by_node = np.asarray(self.rss_by_node, dtype=float)
        self.resync()

    def resync(self):
        # fsum is exactly rounded, so the total does not depend on summation order.
        self.total_rss = math.fsum(self.rss_by_node)

    def set_node(self, j: int, value: float, edge_delta: int = 0):
        self.rss_by_node[j] = value
        self.edge_count += edge_delta
        self.resync()

    def copy(self) -> "ScoreState":
        return ScoreState(self.rss_by_node.copy(), self.edge_count)


def phi_from_totals(edge_count: int, total_rss: float, h: Hyperparams, n: int, p: int) -> float:
    if not total_rss > 0:
        raise ScoreError(f"total RSS must be positive, got {total_rss}")
    return (-edge_count * h.edge_penalty(p)
            - h.rss_weight(n, p) * math.log(total_rss))


def phi(state: ScoreState, h: Hyperparams, n: int, p: int) -> float:
    """Equal-variance log posterior score of a DAG from its RSS profile."""
    return phi_from_totals(state.edge_count, state.total_rss, h, n, p)


def phi_nodewise(s_size: int, rss_j: float, rss_minus_j: float,
                 h: Hyperparams, n: int, p: int) -> float:
    """Score of one node's parent set given the other nodes' total RSS."""
    arg = rss_minus_j + rss_j
    if not (rss_minus_j > 0 and rss_j >= 0 and arg > 0):
        raise ScoreError("nodewise score needs rss_minus_j > 0 and rss_j >= 0")
    return -s_size * h.edge_penalty(p) - h.rss_weight(n, p) * math.log(arg)


def phi_decomposable(g: Dag | int, rss_by_node, h: Hyperparams, n: int, p: int) -> float:
    """Score-equivalent baseline: per-node ``log RSS_j`` terms."""
    rss_by_node = np.asarray(rss_by_node, dtype=float)
    if np.any(~(rss_by_node > 0)):
        raise ScoreError("all RSS entries must be positive")
    edges = g if isinstance(g, int) else g.edge_count
    return (-edges * h.edge_penalty(p)
            - h.rss_weight(n, p, DECOMPOSABLE) * math.fsum(np.log(rss_by_node)))


def score_of(kind: str, edge_count: int, rss_by_node, h: Hyperparams, n: int, p: int) -> float:
    if kind == DECOMPOSABLE:
        return phi_decomposable(edge_count, rss_by_node, h, n, p)
    return phi_from_totals(edge_count, math.fsum(rss_by_node), h, n, p)


def log_accept_ratio(phi_new: float, phi_old: float) -> float:
    """Log Metropolis acceptance probability for a symmetric proposal."""
    return min(0.0, phi_new - phi_old)
