"""MAP DAG selection for a fixed ordering.

For each node the forward phase of nodewise stepwise selection is run with
the *smallest possible* RSS of the other nodes (so it adds as many parents
as any real DAG could justify) and the backward phase with the *largest*
(so it removes as many as possible).  The forward-phase parent sets form a
super-DAG, which a DAG-level backward elimination under the full score
then prunes.

Each nodewise search depends only on the node and the set of nodes that
precede it, so searches are memoized per ``(node, potential-parent set)``
and a move on the ordering only re-runs the nodes whose predecessor set
changed.  The DAG-level pruning is repeated over the whole graph after every
move; all RSS values it needs come from a lazy memo keyed by
``(node, parent-set bitmask)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import DataMatrix, DegenerateDesignError, rss_batch, rss_bounds
from .graph import Dag, Move, Ordering, apply_move, mask_of, nodes_of
from .score import (DECOMPOSABLE, NONDECOMPOSABLE, Hyperparams, ScoreState,
                    score_of)

log = logging.getLogger(__name__)

_DAG_MEMO_LIMIT = 50_000


@dataclass
class SearchPath:
    """Record of one nodewise forward-backward search."""

    node: int
    potential: int
    added: list = field(default_factory=list)  # (parent, rss after adding)
    forward_final: int = 0
    removed: list = field(default_factory=list)  # (parent, rss after removing)
    final: int = 0
    removal_deltas: dict = field(default_factory=dict)  # (mask, parent) -> rss
    cap_hit: bool = False

    @property
    def forward_set(self) -> frozenset:
        return frozenset(nodes_of(self.forward_final))

    @property
    def final_set(self) -> frozenset:
        return frozenset(nodes_of(self.final))


class SelectionCache:
    """Chain-local selection state over one shared, immutable data set.

    Holds the RSS memo, the ordering-free RSS bounds, the current search
    path of every node and memo tables that make revisits cheap.
    """

    def __init__(self, data: DataMatrix, h: Hyperparams | None = None,
                 kind: str = NONDECOMPOSABLE):
        if kind not in (NONDECOMPOSABLE, DECOMPOSABLE):
            raise ValueError(f"unknown score kind {kind!r}")
        self.data = data
        self.gram = data.gram
        self.n, self.p = data.n, data.p
        self.h = (h or Hyperparams()).resolve(self.p)
        self.d_in = self.h.d_in
        self.kind = kind
        self.k0 = self.h.edge_penalty(self.p)
        self.k1 = self.h.rss_weight(self.n, self.p, kind)
        self.bounds = rss_bounds(data)
        if kind == NONDECOMPOSABLE:
            lo, up = list(self.bounds.lower), list(self.bounds.upper)
            self.fwd_offset = [math.fsum(lo[:j] + lo[j + 1:]) for j in range(self.p)]
            self.bwd_offset = [math.fsum(up[:j] + up[j + 1:]) for j in range(self.p)]
        else:
            self.fwd_offset = [0.0] * self.p
            self.bwd_offset = [0.0] * self.p
        diag = np.diag(self.gram)
        self.memo = [{0: float(diag[j])} for j in range(self.p)]
        self.paths: list[SearchPath | None] = [None] * self.p
        self.path_memo: dict[tuple[int, int], SearchPath] = {}
        self.dag_memo: dict[tuple, tuple] = {}
        self.rb_rows: dict[tuple[int, int], np.ndarray] = {}
        self._journal: list | None = None
        self.cap_hits = 0
        self.degenerate_skips = 0
        self.rss_evaluations = 0

    # ------------------------------------------------------------------ RSS

    def rss(self, j: int, mask: int) -> float:
        """Memoized RSS of node ``j`` on the parent set ``mask`` (nan if degenerate)."""
        memo = self.memo[j]
        v = memo.get(mask)
        if v is None:
            idx = np.array([nodes_of(mask)], dtype=np.intp)
            v = float(rss_batch(self.gram, j, idx)[0])
            self.rss_evaluations += 1
            memo[mask] = v
        return v

    def _rss_add(self, j: int, mask: int, base: list, cands: list) -> np.ndarray:
        memo = self.memo[j]
        out = np.empty(len(cands))
        miss = []
        for c, l in enumerate(cands):
            v = memo.get(mask | (1 << l))
            if v is None:
                miss.append(c)
            else:
                out[c] = v
        if miss:
            k = len(base)
            idx = np.empty((len(miss), k + 1), dtype=np.intp)
            idx[:, :k] = base
            idx[:, k] = [cands[c] for c in miss]
            idx.sort(axis=1)
            vals = rss_batch(self.gram, j, idx)
            self.rss_evaluations += len(miss)
            for c, v in zip(miss, vals.tolist()):
                out[c] = v
                memo[mask | (1 << cands[c])] = v
        return out

    def _rss_remove(self, j: int, mask: int, base: list) -> np.ndarray:
        memo = self.memo[j]
        out = np.empty(len(base))
        miss = []
        for c, l in enumerate(base):
            v = memo.get(mask & ~(1 << l))
            if v is None:
                miss.append(c)
            else:
                out[c] = v
        if miss:
            k = len(base)
            arr = np.asarray(base, dtype=np.intp)
            idx = np.empty((len(miss), k - 1), dtype=np.intp)
            for row, c in enumerate(miss):
                idx[row, :c] = arr[:c]
                idx[row, c:] = arr[c + 1:]
            vals = rss_batch(self.gram, j, idx)
            self.rss_evaluations += len(miss)
            for c, v in zip(miss, vals.tolist()):
                out[c] = v
                memo[mask & ~(1 << base[c])] = v
        return out

    # ------------------------------------------------------------ nodewise

    def _node_scores(self, size: int, offset: float, vals: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            sc = -size * self.k0 - self.k1 * np.log(offset + vals)
        bad = np.isnan(sc)
        if bad.any():
            self.degenerate_skips += int(bad.sum())
            sc[bad] = -np.inf
        return sc

    def nodewise(self, j: int, potential: int, off_fwd: float, off_bwd: float) -> SearchPath:
        """Forward-backward selection at node ``j`` over the parent pool ``potential``."""
        path = SearchPath(node=j, potential=potential)
        k0, k1 = self.k0, self.k1
        pool = nodes_of(potential)
        mask = 0
        base: list[int] = []
        r = self.memo[j][0]
        cur = -k1 * math.log(off_fwd + r) if off_fwd + r > 0 else math.inf
        while True:
            cands = [l for l in pool if not (mask >> l) & 1]
            if not cands:
                break
            if len(base) >= self.d_in:
                path.cap_hit = True
                self.cap_hits += 1
                break
            vals = self._rss_add(j, mask, base, cands)
            sc = self._node_scores(len(base) + 1, off_fwd, vals)
            b = int(np.argmax(sc))
            if not sc[b] >= cur:
                break
            l = cands[b]
            mask |= 1 << l
            base.append(l)
            base.sort()
            r = float(vals[b])
            cur = float(sc[b])
            path.added.append((l, r))
        path.forward_final = mask

        size = len(base)
        cur = -size * k0 - k1 * math.log(off_bwd + r) if off_bwd + r > 0 else -math.inf
        while base:
            vals = self._rss_remove(j, mask, base)
            for l, v in zip(base, vals.tolist()):
                path.removal_deltas[(mask, l)] = v
            sc = self._node_scores(size - 1, off_bwd, vals)
            b = int(np.argmax(sc))
            if not sc[b] >= cur:
                break
            l = base.pop(b)
            mask &= ~(1 << l)
            size -= 1
            r = float(vals[b])
            cur = float(sc[b])
            path.removed.append((l, r))
        path.final = mask
        return path

    def _map_path(self, j: int, potential: int) -> SearchPath:
        key = (j, potential)
        path = self.path_memo.get(key)
        if path is None:
            path = self.nodewise(j, potential, self.fwd_offset[j], self.bwd_offset[j])
            self.path_memo[key] = path
        return path

    # --------------------------------------------------------- DAG backward

    def prune(self, masks) -> tuple[tuple, np.ndarray]:
        """DAG-level backward elimination starting from parent sets ``masks``.

        Returns the pruned parent masks and the per-node RSS vector.  Ties in
        the best removal are broken by the lexicographically smallest edge
        ``(i, j)``.
        """
        key = tuple(masks)
        hit = self.dag_memo.get(key)
        if hit is not None:
            return hit
        p = self.p
        pa = list(key)
        r = np.array([self.rss(j, pa[j]) for j in range(p)])
        if np.isnan(r).any():
            bad = int(np.flatnonzero(np.isnan(r))[0])
            raise DegenerateDesignError(bad, nodes_of(pa[bad]))
        edges = sum(bin(m).count("1") for m in pa)
        bases = [nodes_of(m) for m in pa]
        alts = [self._rss_remove(j, pa[j], bases[j]) if bases[j] else None
                for j in range(p)]
        cur = score_of(self.kind, edges, r, self.h, self.n, p)
        nondecomp = self.kind == NONDECOMPOSABLE
        while edges:
            total = math.fsum(r)
            best = None
            for j in range(p):
                alt = alts[j]
                if alt is None:
                    continue
                if nondecomp:
                    crit = (total - r[j]) + alt  # smaller total RSS is better
                else:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        crit = self.k1 * (np.log(alt) - math.log(r[j]))
                crit = np.where(np.isnan(crit), np.inf, crit)
                c = int(np.argmin(crit))
                cand = (float(crit[c]), bases[j][c], j, c)
                if best is None or cand[:3] < best[:3]:
                    best = cand
            if best is None or best[0] == math.inf:
                break
            _, i, j, c = best
            old = r[j]
            r[j] = alts[j][c]
            new = score_of(self.kind, edges - 1, r, self.h, self.n, p)
            if not new >= cur:
                r[j] = old
                break
            cur = new
            edges -= 1
            pa[j] &= ~(1 << i)
            del bases[j][c]
            alts[j] = self._rss_remove(j, pa[j], bases[j]) if bases[j] else None
        r.flags.writeable = False
        out = (tuple(pa), r)
        if len(self.dag_memo) >= _DAG_MEMO_LIMIT:
            self.dag_memo.clear()
        self.dag_memo[key] = out
        return out

    # --------------------------------------------------------- whole DAGs

    def select(self, sigma: Ordering) -> tuple[tuple, np.ndarray]:
        """Recompute every node's search under ``sigma`` and prune."""
        prefix = sigma.prefix_masks()
        for pos, j in enumerate(sigma.perm):
            self.paths[j] = self._map_path(j, prefix[pos])
        return self.prune([path.forward_final for path in self.paths])

    def update(self, sigma: Ordering, move: Move) -> tuple[Ordering, tuple, np.ndarray, int]:
        """Apply ``move`` to ``sigma`` re-running only the touched nodes.

        The replaced search paths are journaled so :meth:`rollback` can
        restore them if the proposal is rejected.
        """
        new = apply_move(sigma, move)
        touched = move.touched
        m = 0
        perm = new.perm
        for node in perm[: touched.start]:
            m |= 1 << node
        journal = []
        for pos in touched:
            j = perm[pos]
            journal.append((j, self.paths[j]))
            self.paths[j] = self._map_path(j, m)
            m |= 1 << j
        self._journal = journal
        pa, r = self.prune([path.forward_final for path in self.paths])
        return new, pa, r, len(touched)

    def rollback(self):
        if self._journal:
            for j, old in reversed(self._journal):
                self.paths[j] = old
        self._journal = None

    def commit(self):
        self._journal = None

    def state_of(self, masks) -> ScoreState:
        r = np.array([self.rss(j, m) for j, m in enumerate(masks)])
        return ScoreState(r, sum(bin(m).count("1") for m in masks))

    def score(self, masks, r=None) -> float:
        if r is None:
            r = np.array([self.rss(j, m) for j, m in enumerate(masks)])
        edges = sum(bin(m).count("1") for m in masks)
        return score_of(self.kind, edges, r, self.h, self.n, self.p)

    # ------------------------------------------------------------- RB rows

    def rb_row(self, j: int, mask: int) -> np.ndarray:
        """RSS of node ``j`` after toggling each candidate parent ``i``.

        Entry ``i`` is the RSS on ``mask`` with ``i`` added (if absent) or
        removed (if present); ``nan`` at ``j`` itself and for degenerate sets.
        """
        key = (j, mask)
        row = self.rb_rows.get(key)
        if row is not None:
            return row
        base = nodes_of(mask)
        row = np.full(self.p, np.nan)
        cands = [i for i in range(self.p) if i != j and not (mask >> i) & 1]
        if cands:
            row[cands] = self._rss_add(j, mask, base, cands)
        if base:
            row[base] = self._rss_remove(j, mask, base)
        self.rb_rows[key] = row
        return row


def _resolve_cache(cache: SelectionCache, h: Hyperparams | None):
    if h is not None and h.resolve(cache.p) != cache.h:
        raise ValueError("hyperparameters differ from the ones the cache was built with")


def nodewise_fb(j: int, potential, rss_fwd: float, rss_bwd: float,
                cache: SelectionCache, h: Hyperparams | None = None):
    """Nodewise forward-backward selection.

    Parameters
    ----------
    j : int
        Node whose parent set is selected.
    potential : iterable of int
        Candidate parents.
    rss_fwd, rss_bwd : float
        Total RSS of the other nodes assumed in the forward and backward
        phases.

    Returns
    -------
    (frozenset, SearchPath)
    """
    _resolve_cache(cache, h)
    pmask = mask_of(potential)
    if (pmask >> j) & 1:
        raise ValueError(f"node {j} cannot be its own potential parent")
    path = cache.nodewise(j, pmask, rss_fwd, rss_bwd)
    return path.final_set, path


def map_dag(sigma: Ordering, data: DataMatrix | None, cache: SelectionCache,
            h: Hyperparams | None = None) -> Dag:
    """MAP DAG among those consistent with ``sigma`` with in-degree ``<= d_in``."""
    _resolve_cache(cache, h)
    if data is not None and data is not cache.data:
        raise ValueError("cache was built for a different data matrix")
    pa, _ = cache.select(sigma)
    return Dag.from_masks(pa)


def update_after_move(sigma: Ordering, move: Move, current: Dag | None,
                      cache: SelectionCache, h: Hyperparams | None = None):
    """MAP DAG of ``apply_move(sigma, move)`` reusing cached node searches.

    ``cache`` must hold the search paths for ``sigma`` (as left by
    :func:`map_dag` or a previous update).  Returns the new DAG and the
    number of nodewise selections the move required.
    """
    _resolve_cache(cache, h)
    _, pa, _, count = cache.update(sigma, move)
    if current is not None and current.masks == pa:
        return current, count
    return Dag.from_masks(pa), count


def score_dag(g: Dag, cache: SelectionCache) -> float:
    return cache.score(g.masks)


def dagwise_fb(sigma: Ordering, cache: SelectionCache) -> Dag:
    """Forward-backward selection over whole DAGs consistent with ``sigma``.

    Each forward step adds the single edge that most improves the score
    (respecting ``d_in``); the backward phase is :meth:`SelectionCache.prune`.
    """
    p = cache.p
    prefix = sigma.prefix_masks()
    potential = [prefix[sigma.inverse[j]] for j in range(p)]
    pa = [0] * p
    r = np.array([cache.rss(j, 0) for j in range(p)])
    edges = 0
    cur = cache.score(pa, r)
    while True:
        best = None
        for j in range(p):
            if bin(pa[j]).count("1") >= cache.d_in:
                continue
            cands = [i for i in nodes_of(potential[j]) if not (pa[j] >> i) & 1]
            if not cands:
                continue
            vals = cache._rss_add(j, pa[j], nodes_of(pa[j]), cands)
            for i, v in zip(cands, vals.tolist()):
                if math.isnan(v):
                    continue
                trial = r.copy()
                trial[j] = v
                sc = score_of(cache.kind, edges + 1, trial, cache.h, cache.n, p)
                if best is None or sc > best[0] or (sc == best[0] and (i, j) < best[1:3]):
                    best = (sc, i, j, v)
        if best is None or not best[0] >= cur:
            break
        cur, i, j, v = best
        pa[j] |= 1 << i
        r[j] = v
        edges += 1
    pruned, _ = cache.prune(pa)
    return Dag.from_masks(pruned)


def exhaustive_nodewise(j: int, potential, offset: float, cache: SelectionCache) -> frozenset:
    """Best parent set of size ``<= d_in`` by full enumeration (small pools only)."""
    pool = sorted(potential)
    best = (-math.inf, ())
    for size in range(min(cache.d_in, len(pool)) + 1):
        for combo in itertools.combinations(pool, size):
            v = cache.rss(j, mask_of(combo))
            if math.isnan(v) or not offset + v > 0:
                continue
            sc = -size * cache.k0 - cache.k1 * math.log(offset + v)
            if sc > best[0]:
                best = (sc, combo)
    return frozenset(best[1])


def rb_matrix(sigma: Ordering, g: Dag, data: DataMatrix | None, cache: SelectionCache,
              h: Hyperparams | None = None) -> np.ndarray:
    """Conditional edge-inclusion probabilities given ``(sigma, g)``.

    Entry ``[i, j]`` is the probability of ``i -> j`` when only that edge is
    toggled in ``g``, and zero unless ``i`` precedes ``j`` in ``sigma``.  The
    in-degree cap is not applied to the added edge.
    """
    _resolve_cache(cache, h)
    return rb_from_masks(sigma.inverse, g.masks, cache)


def rb_from_masks(inverse, masks, cache: SelectionCache, r: np.ndarray | None = None) -> np.ndarray:
    p = cache.p
    if r is None:
        r = np.array([cache.rss(j, m) for j, m in enumerate(masks)])
    alt = np.empty((p, p))
    present = np.zeros((p, p), dtype=bool)
    for j, m in enumerate(masks):
        alt[j] = cache.rb_row(j, m)
        if m:
            present[j, nodes_of(m)] = True
    inv = np.asarray(inverse)
    allowed = inv[None, :] < inv[:, None]  # [j, i]: i precedes j
    with np.errstate(divide="ignore", invalid="ignore"):
        if cache.kind == NONDECOMPOSABLE:
            total = math.fsum(r)
            swing = np.log((total - r)[:, None] + alt) - math.log(total)
        else:
            swing = np.log(alt) - np.log(r)[:, None]
    # swing: change of the log-RSS term from "without edge" to "with edge"
    swing = np.where(present, -swing, swing)
    out = expit(-cache.k0 - cache.k1 * swing)
    bad = np.isnan(out) & allowed
    if bad.any():
        log.debug("%d conditional edge probabilities skipped (degenerate)", int(bad.sum()))
    out = np.where(allowed & ~bad, out, 0.0)
    return out.T.copy()
