"""Recovery metrics, Gelman-Rubin diagnostics and the exact small-p posterior.

:func:`exact_posterior` is deliberately independent of the selection code:
it computes every RSS with ``numpy.linalg.lstsq`` on the raw data and finds
each ordering's best DAG by brute force, so it can serve as an oracle for
the sampler.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .dataset import DataMatrix
from .graph import Dag, Ordering
from .score import DECOMPOSABLE, NONDECOMPOSABLE, Hyperparams

EXACT_MAX_P = 6
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class MetricReport:
    hd: float
    fnr_pct: float
    fdr_pct: float
    flip_pct: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def metrics(gamma_true, gamma_est, threshold: float | None = None) -> MetricReport:
    """Hamming distance, FNR, FDR and flipped-edge rate of an edge estimate.

    ``gamma_est`` may hold fractional inclusion probabilities; they enter
    every formula linearly.  With ``threshold`` set, entries ``> threshold``
    are first rounded to 1 and the rest to 0.  FDR divides by the total
    estimated mass and is 0 when that mass is 0.  Without true edges FNR and
    Flip are reported as 0 and ``degenerate`` is set.
    """
    gt = np.asarray(gamma_true, dtype=float)
    ge = np.asarray(gamma_est, dtype=float)
    if gt.shape != ge.shape or gt.ndim != 2 or gt.shape[0] != gt.shape[1]:
        raise ValueError(f"shape mismatch: {gt.shape} vs {ge.shape}")
    if np.any(np.diag(gt)) or np.any(np.diag(ge)):
        raise ValueError("edge matrices must have zero diagonals")
    if threshold is not None:
        ge = (ge > threshold).astype(float)
    if np.any((ge < 0) | (ge > 1)):
        raise ValueError("estimated inclusion probabilities must lie in [0, 1]")
    hd = float(np.abs(gt - ge).sum())
    n_true = gt.sum()
    mass = ge.sum()
    fdr = 100.0 * float(((1 - gt) * ge).sum() / mass) if mass > 0 else 0.0
    if n_true == 0:
        return MetricReport(hd, 0.0, fdr, 0.0, degenerate=True)
    fnr = 100.0 * float((gt * (1 - ge)).sum() / n_true)
    flip = 100.0 * float((gt.T * ge).sum() / n_true)
    return MetricReport(hd, fnr, fdr, flip)


def summarize_reports(reports) -> dict:
    """Mean and standard error of each metric over replicates."""
    out = {}
    for key in ("hd", "fnr_pct", "fdr_pct", "flip_pct"):
        v = np.array([getattr(r, key) for r in reports], dtype=float)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        out[key] = {"mean": float(v.mean()), "se": se}
    out["replicates"] = len(reports)
    return out


def gelman_rubin(chains) -> np.ndarray:
    """Potential scale reduction factor per directed edge.

    ``chains`` is a sequence of ``(length, p, p)`` 0/1 indicator arrays, one
    per chain, all of the same length.  No degrees-of-freedom correction is
    applied.  A zero within-chain variance gives ``inf`` when the chains
    disagree and ``1`` when they agree.
    """
    chains = [np.asarray(c, dtype=float) for c in chains]
    m = len(chains)
    if m < 2:
        raise ValueError("need at least two chains")
    shapes = {c.shape for c in chains}
    if len(shapes) != 1:
        raise ValueError(f"chains have mismatched shapes: {sorted(shapes)}")
    x = np.stack(chains)
    n = x.shape[1]
    if n < 10:
        raise ValueError("each chain needs at least 10 post-burn-in draws")
    means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean(axis=0)
    b = n * means.var(axis=0, ddof=1)
    v = (n - 1) / n * w + (m + 1) / (m * n) * b
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(v / w)
    zero_w = w <= 0
    r[zero_w & (b > 0)] = np.inf
    r[zero_w & ~(b > 0)] = 1.0
    return r


def gr_summary(r: np.ndarray, cutoff: float = 1.1) -> dict:
    """Share of off-diagonal entries at or below ``cutoff``, infinities and quantiles."""
    p = r.shape[0]
    off = r[~np.eye(p, dtype=bool)]
    finite = off[np.isfinite(off)]
    qs = [0.5, 0.9, 0.99, 1.0]
    return {
        "edges": int(off.size),
        "share_le_cutoff": float(np.mean(off <= cutoff)),
        "cutoff": cutoff,
        "n_infinite": int(np.isinf(off).sum()),
        "quantiles": {str(q): (float(np.quantile(finite, q)) if finite.size else None)
                      for q in qs},
    }


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class ExactPosterior:
    order_probs: dict  # Ordering -> probability
    dag_probs: dict  # parent-mask tuple -> probability
    map_dag_by_order: dict  # Ordering -> Dag
    order_log_scores: dict  # Ordering -> score of its best DAG

    def dag_prob(self, g: Dag) -> float:
        return self.dag_probs.get(g.masks, 0.0)


def _lstsq_rss(x: np.ndarray, j: int, parents) -> float:
    y = x[:, j]
    if not parents:
        return float(y @ y)
    a = x[:, list(parents)]
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    res = y - a @ coef
    return float(res @ res)


def _edge_list(masks) -> list:
    return sorted((i, j) for j, m in enumerate(masks) for i in range(len(masks)) if (m >> i) & 1)


def exact_posterior(data: DataMatrix, h: Hyperparams | None = None,
                    kind: str = NONDECOMPOSABLE) -> ExactPosterior:
    """Exact ordering and DAG posteriors by full enumeration (``p <= 6``).

    For every ordering all DAGs consistent with it whose in-degrees are at
    most ``d_in`` are scored; among exact score ties the DAG with the
    lexicographically smallest sorted edge list wins.
    """
    p, n = data.p, data.n
    if p > EXACT_MAX_P:
        raise ValueError(f"exact enumeration is limited to p <= {EXACT_MAX_P}, got p={p}")
    h = (h or Hyperparams()).resolve(p)
    x = data.values
    k0 = h.edge_penalty(p)
    k1 = h.rss_weight(n, p, kind)
    table = {}
    for j in range(p):
        others = [i for i in range(p) if i != j]
        for size in range(min(h.d_in, p - 1) + 1):
            for combo in itertools.combinations(others, size):
                m = sum(1 << i for i in combo)
                table[(j, m)] = _lstsq_rss(x, j, combo)

    def options(j, prefix):
        masks, rss, sizes = [], [], []
        for size in range(min(h.d_in, len(prefix)) + 1):
            for combo in itertools.combinations(prefix, size):
                m = sum(1 << i for i in combo)
                masks.append(m)
                rss.append(table[(j, m)])
                sizes.append(size)
        return masks, np.array(rss), np.array(sizes)

    def exact_score(masks):
        r = [table[(j, m)] for j, m in enumerate(masks)]
        e = sum(bin(m).count("1") for m in masks)
        if kind == DECOMPOSABLE:
            return -e * k0 - k1 * math.fsum(math.log(v) for v in r)
        return -e * k0 - k1 * math.log(math.fsum(r))

    orders, log_scores, maps = [], [], []
    for perm in itertools.permutations(range(p)):
        opts = [options(j, sorted(perm[:pos])) for pos, j in enumerate(perm)]
        total = np.zeros(1)
        edges = np.zeros(1)
        for _, rss, sizes in opts:
            term = np.log(rss) if kind == DECOMPOSABLE else rss
            total = (total[:, None] + term[None, :]).ravel()
            edges = (edges[:, None] + sizes[None, :]).ravel()
        agg = total if kind == DECOMPOSABLE else np.log(total)
        sc = -edges * k0 - k1 * agg
        best = sc.max()
        tied = np.flatnonzero(sc >= best - _TIE_RTOL * abs(best))
        shape = [len(o[0]) for o in opts]
        cands = []
        for flat in tied:
            idx = np.unravel_index(flat, shape)
            masks = [0] * p
            for (ms, _, _), pos, j in zip(opts, idx, perm):
                masks[j] = ms[pos]
            cands.append(tuple(masks))
        if len(cands) > 1:
            top = max(exact_score(c) for c in cands)
            cands = [c for c in cands if exact_score(c) >= top - _TIE_RTOL * abs(top)]
        chosen = min(cands, key=_edge_list)
        orders.append(Ordering(perm))
        maps.append(chosen)
        log_scores.append(exact_score(chosen))

    ls = np.array(log_scores)
    probs = np.exp(ls - logsumexp(ls))
    order_probs = dict(zip(orders, probs.tolist()))
    # DAG posterior: score times the number of orderings selecting the DAG
    count: dict = {}
    score_of_dag: dict = {}
    for masks, s in zip(maps, log_scores):
        count[masks] = count.get(masks, 0) + 1
        score_of_dag[masks] = s
    keys = list(count)
    w = np.array([score_of_dag[k] + math.log(count[k]) for k in keys])
    dprobs = np.exp(w - logsumexp(w))
    return ExactPosterior(
        order_probs=order_probs,
        dag_probs=dict(zip(keys, dprobs.tolist())),
        map_dag_by_order={o: Dag.from_masks(m) for o, m in zip(orders, maps)},
        order_log_scores=dict(zip(orders, log_scores)),
    )


def visit_frequencies(counts) -> dict:
    """Normalize a ``perm -> count`` mapping to ``Ordering -> frequency``."""
    total = sum(counts.values())
    return {Ordering(k): v / total for k, v in counts.items()}
