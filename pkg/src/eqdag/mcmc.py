"""Metropolis-Hastings sampling on orderings.

Each ordering is scored by its MAP DAG.  Proposals are drawn uniformly from
one of three symmetric neighborhoods, so the acceptance probability is just
the score ratio.  After burn-in every iteration contributes its conditional
edge-probability matrix to the Rao-Blackwellized PIP estimate.

Random numbers come from numpy's Philox generator (a counter-based
generator with published constants), seeded with the chain seed; chain
``k`` of a multichain run uses ``seed + k``.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import DataMatrix
from .graph import ADJACENT, Dag, Ordering, neighborhood_kind, sample_move
from .score import NONDECOMPOSABLE, SCORE_KINDS, Hyperparams
from .selection import SelectionCache, rb_from_masks
from .topdown import TopDownResult, itd

log = logging.getLogger(__name__)

TRACE_DTYPE = np.dtype([
    ("iteration", np.int64),
    ("log_score", np.float64),
    ("accepted", np.bool_),
    ("nodewise_count", np.int32),
    ("effective_cum", np.int64),
])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


@dataclass(frozen=True)
class ChainConfig:
    """Settings of one MCMC run.

    ``burn_in=None`` discards the first half of the iterations.
    ``init`` is ``"itd"``, ``"random"`` or an explicit ordering.
    ``max_effective`` stops the chain once the cumulative number of nodewise
    selections reaches it.
    """

    iterations: int
    burn_in: int | None = None
    neighborhood: str = ADJACENT
    seed: int = 0
    init: str | Sequence[int] = "itd"
    hyper: Hyperparams = field(default_factory=Hyperparams)
    score_kind: str = NONDECOMPOSABLE
    rb_stride: int = 1
    sample_stride: int = 0
    max_effective: int | None = None
    max_outer: int = 20
    compute_pip: bool = True
    track_orderings: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        object.__setattr__(self, "neighborhood", neighborhood_kind(self.neighborhood))
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 2)
        if self.burn_in < 0 or (self.iterations > 0 and self.burn_in >= self.iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.score_kind not in SCORE_KINDS:
            raise ValueError(f"score_kind must be one of {SCORE_KINDS}")
        if self.rb_stride < 1:
            raise ValueError("rb_stride must be positive")
        if self.sample_stride < 0:
            raise ValueError("sample_stride must be non-negative")
        if isinstance(self.init, str):
            if self.init not in ("itd", "random"):
                raise ValueError("init must be 'itd', 'random' or an ordering")
        else:
            object.__setattr__(self, "init", tuple(int(v) for v in self.init))


@dataclass
class ChainOutput:
    trace: np.ndarray
    pip: np.ndarray
    final_ordering: Ordering
    final_dag: Dag
    initial_ordering: Ordering
    initial_log_score: float
    effective_iterations: int
    pip_count: int = 0
    samples: list = field(default_factory=list)  # (iteration, perm, parent masks)
    ordering_counts: Counter | None = None
    warm_start: TopDownResult | None = None
    seed: int = 0

    @property
    def acceptance_rate(self) -> float:
        if len(self.trace) == 0:
            return 0.0
        return float(self.trace["accepted"].mean())

    def sample_adjacency(self) -> np.ndarray:
        """Stack of 0/1 adjacency matrices of the stored samples."""
        p = self.pip.shape[0]
        out = np.zeros((len(self.samples), p, p), dtype=np.int8)
        for k, (_, _, masks) in enumerate(self.samples):
            for j, m in enumerate(masks):
                i = 0
                while m:
                    if m & 1:
                        out[k, i, j] = 1
                    m >>= 1
                    i += 1
        return out


def initial_ordering(config: ChainConfig, data: DataMatrix, cache: SelectionCache,
                     rng: np.random.Generator):
    if config.init == "random":
        return Ordering.random(data.p, rng), None
    if config.init == "itd":
        if cache.kind == NONDECOMPOSABLE:
            td_cache = cache
        else:
            td_cache = SelectionCache(data, config.hyper)
        res = itd(data, td_cache, max_outer=config.max_outer)
        return res.ordering, res
    sigma = Ordering(config.init)
    if sigma.p != data.p:
        raise ValueError(f"initial ordering has length {sigma.p}, data has p={data.p}")
    return sigma, None


def run_chain(config: ChainConfig, data: DataMatrix,
              cache: SelectionCache | None = None) -> ChainOutput:
    """Run one order-MCMC chain and return its trace and PIP estimate."""
    if cache is None:
        cache = SelectionCache(data, config.hyper, config.score_kind)
    elif cache.kind != config.score_kind or cache.h != config.hyper.resolve(data.p):
        raise ValueError("cache does not match the chain configuration")
    rng = make_rng(config.seed)
    p = data.p
    sigma, warm = initial_ordering(config, data, cache, rng)
    pa, r = cache.select(sigma)
    cur = cache.score(pa, r)
    init_sigma, init_score = sigma, cur

    T = config.iterations
    trace = np.zeros(T, dtype=TRACE_DTYPE)
    pip = np.zeros((p, p))
    pip_count = 0
    rb_last = None
    samples = []
    counts = Counter() if config.track_orderings else None
    kind = config.neighborhood
    eff = 0
    done = 0
    for t in range(1, T + 1):
        move = sample_move(p, kind, rng)
        new_sigma, new_pa, new_r, cnt = cache.update(sigma, move)
        new_score = cache.score(new_pa, new_r)
        if not math.isfinite(new_score):
            raise FloatingPointError(f"non-finite score at iteration {t}")
        u = rng.random()
        accepted = u <= math.exp(min(0.0, new_score - cur))
        if accepted:
            cache.commit()
            if new_pa != pa or new_sigma.inverse != sigma.inverse:
                rb_last = None
            sigma, pa, r, cur = new_sigma, new_pa, new_r, new_score
        else:
            cache.rollback()
            if config.debug:
                _audit_rollback(cache, sigma)
        eff += cnt
        trace[t - 1] = (t, cur, accepted, cnt, eff)
        done = t
        if t > config.burn_in:
            k = t - config.burn_in - 1
            if config.compute_pip and k % config.rb_stride == 0:
                if rb_last is None:
                    rb_last = rb_from_masks(sigma.inverse, pa, cache, r)
                pip += rb_last
                pip_count += 1
            if config.sample_stride and k % config.sample_stride == 0:
                samples.append((t, sigma.perm, pa))
            if counts is not None:
                counts[sigma.perm] += 1
        if config.max_effective is not None and eff >= config.max_effective:
            break
    trace = trace[:done]
    if pip_count:
        pip /= pip_count
    return ChainOutput(
        trace=trace,
        pip=pip,
        final_ordering=sigma,
        final_dag=Dag.from_masks(pa),
        initial_ordering=init_sigma,
        initial_log_score=init_score,
        effective_iterations=eff,
        pip_count=pip_count,
        samples=samples,
        ordering_counts=counts,
        warm_start=warm,
        seed=config.seed,
    )


def _audit_rollback(cache: SelectionCache, sigma: Ordering):
    prefix = sigma.prefix_masks()
    for pos, j in enumerate(sigma.perm):
        path = cache.paths[j]
        if path is None or path.potential != prefix[pos]:
            raise AssertionError(f"search path of node {j} not restored after rejection")


class MultiChainError(RuntimeError):
    """Raised after all chains ran when at least one of them failed."""

    def __init__(self, outputs, failures):
        self.outputs = outputs
        self.failures = failures
        names = ", ".join(f"chain {k}: {exc!r}" for k, exc in failures)
        super().__init__(f"{len(failures)} chain(s) failed: {names}")


def _run_indexed(args):
    k, config, data = args
    try:
        return k, run_chain(config, data), None
    except Exception as exc:  # reported after siblings finish
        return k, None, exc


def run_multichain(config: ChainConfig, n_chains: int, data: DataMatrix,
                   jobs: int = 1) -> list[ChainOutput]:
    """Run ``n_chains`` independent chains with seeds ``seed + k``.

    Results are ordered by chain index and do not depend on ``jobs``.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be at least 1")
    tasks = [(k, replace(config, seed=config.seed + k), data) for k in range(n_chains)]
    if jobs > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_indexed, tasks))
    else:
        results = [_run_indexed(t) for t in tasks]
    results.sort(key=lambda x: x[0])
    outputs = [out for _, out, _ in results]
    failures = [(k, exc) for k, _, exc in results if exc is not None]
    if failures:
        for k, exc in failures:
            log.error("chain %d failed: %s", k, exc)
        raise MultiChainError(outputs, failures)
    return outputs


def mean_pip(outputs: Sequence[ChainOutput]) -> np.ndarray:
    """Average of per-chain PIP matrices weighted by their sample counts."""
    w = np.array([o.pip_count for o in outputs], dtype=float)
    if w.sum() == 0:
        return np.zeros_like(outputs[0].pip)
    return np.tensordot(w / w.sum(), np.stack([o.pip for o in outputs]), axes=1)
