"""Score-based top-down ordering estimation and its iterated refinement.

Under equal error variances a source node has the smallest variance, so an
ordering can be built by repeatedly appending the unplaced node whose
variance is least explained by the nodes already placed.  Here "explained"
means regressing on the parent set chosen by nodewise stepwise selection
under the equal-variance score, which in turn needs the other nodes' RSS;
iterating the construction updates those RSS estimates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dataset import DataMatrix
from .graph import Ordering, mask_of, nodes_of
from .score import Hyperparams
from .selection import SelectionCache, exhaustive_nodewise

log = logging.getLogger(__name__)


@dataclass
class TopDownResult:
    ordering: Ordering
    rss: np.ndarray
    outer_iterations: int = 1
    converged: bool = True


def std(rss_init, data: DataMatrix | None, cache: SelectionCache,
        h: Hyperparams | None = None, exhaustive: bool = False) -> TopDownResult:
    """One top-down pass started from the RSS vector ``rss_init``.

    ``exhaustive=True`` replaces stepwise selection by full subset
    enumeration; only sensible for ``p <= 12``.
    """
    if h is not None and h.resolve(cache.p) != cache.h:
        raise ValueError("hyperparameters differ from the ones the cache was built with")
    rss = np.array(rss_init, dtype=float)
    p = cache.p
    if rss.shape != (p,):
        raise ValueError(f"rss_init must have length {p}")
    if np.any(~(rss > 0)):
        raise ValueError("rss_init entries must be positive")
    if exhaustive and p > 12:
        raise ValueError("exhaustive parent search is limited to p <= 12")
    first = int(np.argmin(rss))
    order = [first]
    placed = 1 << first
    unplaced = [j for j in range(p) if j != first]
    while unplaced:
        for j in unplaced:
            vals = rss.tolist()
            offset = math.fsum(vals[:j] + vals[j + 1:])
            if exhaustive:
                parents = mask_of(exhaustive_nodewise(j, nodes_of(placed), offset, cache))
            else:
                parents = cache.nodewise(j, placed, offset, offset).final
            rss[j] = cache.rss(j, parents)
        k = int(np.argmin(rss[unplaced]))
        nxt = unplaced.pop(k)
        order.append(nxt)
        placed |= 1 << nxt
    return TopDownResult(Ordering(order), rss)


def itd(data: DataMatrix | None, cache: SelectionCache, h: Hyperparams | None = None,
        max_outer: int = 20, exhaustive: bool = False) -> TopDownResult:
    """Iterate :func:`std` on its own RSS output until the ordering repeats.

    ``outer_iterations`` counts STD passes.  If ``max_outer`` passes go by
    without a repeat, the last ordering is returned with ``converged=False``.
    """
    if max_outer < 1:
        raise ValueError("max_outer must be at least 1")
    diag = np.diag(cache.gram).copy()
    res = std(diag, data, cache, h, exhaustive)
    passes = 1
    while passes < max_outer:
        nxt = std(res.rss, data, cache, h, exhaustive)
        passes += 1
        if nxt.ordering == res.ordering:
            return TopDownResult(res.ordering, res.rss, passes, True)
        res = nxt
    log.warning("top-down iteration stopped after %d passes without a fixed point", passes)
    return TopDownResult(res.ordering, res.rss, passes, False)
