"""Orderings, DAGs and the three proposal neighborhoods on orderings.

Nodes and positions are 0-based throughout the Python API.  Text formats
on disk (edge lists) are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ADJACENT = "adjacent"
TRANSPOSITION = "transposition"
SHUFFLE = "shuffle"
KINDS = (ADJACENT, TRANSPOSITION, SHUFFLE)

_KIND_ALIASES = {
    "adj": ADJACENT,
    "adjacent": ADJACENT,
    "rtp": TRANSPOSITION,
    "transposition": TRANSPOSITION,
    "random-transposition": TRANSPOSITION,
    "rrs": SHUFFLE,
    "shuffle": SHUFFLE,
    "random-to-random": SHUFFLE,
}


def neighborhood_kind(name: str) -> str:
    try:
        return _KIND_ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown neighborhood {name!r}; choose from {KINDS}") from None


class Ordering:
    """A permutation of ``range(p)`` with its inverse.

    ``perm[k]`` is the node at position ``k``; ``inverse[node]`` is its
    position.
    """

    __slots__ = ("perm", "inverse")

    def __init__(self, perm: Iterable[int]):
        perm = tuple(int(v) for v in perm)
        p = len(perm)
        inverse = [-1] * p
        for pos, node in enumerate(perm):
            if not 0 <= node < p or inverse[node] != -1:
                raise ValueError(f"not a permutation of range({p}): {perm}")
            inverse[node] = pos
        self.perm = perm
        self.inverse = tuple(inverse)

    @classmethod
    def identity(cls, p: int) -> "Ordering":
        return cls(range(p))

    @classmethod
    def random(cls, p: int, rng: np.random.Generator) -> "Ordering":
        return cls(rng.permutation(p))

    @classmethod
    def _trusted(cls, perm: tuple, inverse: tuple) -> "Ordering":
        obj = cls.__new__(cls)
        obj.perm = perm
        obj.inverse = inverse
        return obj

    @property
    def p(self) -> int:
        return len(self.perm)

    def __len__(self):
        return len(self.perm)

    def __iter__(self):
        return iter(self.perm)

    def __getitem__(self, pos):
        return self.perm[pos]

    def __eq__(self, other):
        return isinstance(other, Ordering) and self.perm == other.perm

    def __hash__(self):
        return hash(self.perm)

    def __repr__(self):
        return f"Ordering({list(self.perm)})"

    def prefix_masks(self) -> list[int]:
        """Bitmask of the nodes in positions ``0..k-1`` for each ``k``."""
        masks = [0] * (self.p + 1)
        m = 0
        for k, node in enumerate(self.perm):
            masks[k] = m
            m |= 1 << node
        masks[self.p] = m
        return masks

    def parent_mask(self, j: int) -> int:
        m = 0
        for node in self.perm[: self.inverse[j]]:
            m |= 1 << node
        return m


@dataclass(frozen=True)
class Move:
    """A proposal on orderings.

    ``transposition`` swaps positions ``i`` and ``j``; ``adjacent`` is the
    special case ``j = i + 1``; ``shuffle`` removes the element at position
    ``i`` and reinserts it at position ``j``.
    """

    kind: str
    i: int
    j: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown move kind {self.kind!r}")
        if self.i == self.j:
            raise ValueError("move positions must differ")
        if self.kind == ADJACENT and self.j != self.i + 1:
            raise ValueError("adjacent move requires j = i + 1")

    @property
    def touched(self) -> range:
        lo, hi = min(self.i, self.j), max(self.i, self.j)
        return range(lo, hi + 1)

    def inverse(self) -> "Move":
        if self.kind == SHUFFLE:
            return Move(SHUFFLE, self.j, self.i)
        return self


def potential_parents(sigma: Ordering, j: int) -> frozenset:
    """Nodes preceding ``j`` in ``sigma``."""
    return frozenset(sigma.perm[: sigma.inverse[j]])


def apply_move(sigma: Ordering, move: Move) -> Ordering:
    p = sigma.p
    i, j = move.i, move.j
    if not (0 <= i < p and 0 <= j < p):
        raise IndexError(f"move {move} out of range for p={p}")
    perm = list(sigma.perm)
    if move.kind == SHUFFLE:
        node = perm.pop(i)
        perm.insert(j, node)
    else:
        perm[i], perm[j] = perm[j], perm[i]
    inverse = list(sigma.inverse)
    for pos in move.touched:
        inverse[perm[pos]] = pos
    return Ordering._trusted(tuple(perm), tuple(inverse))


def neighborhood_size(kind: str, p: int) -> int:
    if kind == ADJACENT:
        return p - 1
    if kind == TRANSPOSITION:
        return p * (p - 1) // 2
    return p * (p - 1)


def enumerate_moves(kind: str, p: int) -> list[Move]:
    if kind == ADJACENT:
        return [Move(ADJACENT, i, i + 1) for i in range(p - 1)]
    if kind == TRANSPOSITION:
        return [Move(TRANSPOSITION, i, j) for i in range(p) for j in range(i + 1, p)]
    return [Move(SHUFFLE, i, j) for i in range(p) for j in range(p) if i != j]


def sample_move(sigma: Ordering | int, kind: str, rng: np.random.Generator) -> Move:
    """Draw a move uniformly from the neighborhood of the given kind.

    The shuffle neighborhood is indexed by ordered pairs ``i != j``; the two
    pairs that yield the same adjacent swap stay distinct proposals, which
    keeps the proposal symmetric.
    """
    p = sigma if isinstance(sigma, int) else sigma.p
    if p < 2:
        raise ValueError("need at least two nodes")
    if kind == ADJACENT:
        i = int(rng.integers(p - 1))
        return Move(ADJACENT, i, i + 1)
    if kind not in (TRANSPOSITION, SHUFFLE):
        raise ValueError(f"unknown neighborhood {kind!r}")
    i = int(rng.integers(p))
    j = int(rng.integers(p - 1))
    if j >= i:
        j += 1
    if kind == TRANSPOSITION:
        return Move(TRANSPOSITION, min(i, j), max(i, j))
    return Move(SHUFFLE, i, j)


def mask_of(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << int(v)
    return m


def nodes_of(mask: int) -> list[int]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


class Dag:
    """A DAG stored as one parent set per node."""

    __slots__ = ("parents", "_masks")

    def __init__(self, parents: Sequence[Iterable[int]], check: bool = True):
        self.parents = tuple(frozenset(int(i) for i in pa) for pa in parents)
        self._masks = tuple(mask_of(pa) for pa in self.parents)
        if check:
            p = len(self.parents)
            for j, pa in enumerate(self.parents):
                if j in pa:
                    raise ValueError(f"self loop at node {j}")
                if any(not 0 <= i < p for i in pa):
                    raise ValueError(f"parent index out of range at node {j}")
            if not self.is_acyclic():
                raise ValueError("parent sets contain a directed cycle")

    @classmethod
    def from_masks(cls, masks: Sequence[int]) -> "Dag":
        obj = cls.__new__(cls)
        obj._masks = tuple(masks)
        obj.parents = tuple(frozenset(nodes_of(m)) for m in masks)
        return obj

    @classmethod
    def empty(cls, p: int) -> "Dag":
        return cls.from_masks((0,) * p)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        parents = [set() for _ in range(p)]
        for i, j in edges:
            parents[j].add(i)
        return cls(parents)

    @classmethod
    def from_adjacency(cls, adj) -> "Dag":
        adj = np.asarray(adj)
        return cls([np.flatnonzero(adj[:, j]) for j in range(adj.shape[1])])

    @property
    def p(self) -> int:
        return len(self.parents)

    @property
    def masks(self) -> tuple[int, ...]:
        return self._masks

    @property
    def edge_count(self) -> int:
        return sum(len(pa) for pa in self.parents)

    def edges(self) -> list[tuple[int, int]]:
        """Edges ``(i, j)`` meaning ``i -> j``, sorted lexicographically."""
        return sorted((i, j) for j, pa in enumerate(self.parents) for i in pa)

    def children(self, j: int) -> frozenset:
        return frozenset(k for k, pa in enumerate(self.parents) if j in pa)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.p, self.p), dtype=np.int8)
        for i, j in self.edges():
            a[i, j] = 1
        return a

    def is_acyclic(self) -> bool:
        indeg = [len(pa) for pa in self.parents]
        children = [[] for _ in range(self.p)]
        for j, pa in enumerate(self.parents):
            for i in pa:
                children[i].append(j)
        stack = [j for j in range(self.p) if indeg[j] == 0]
        seen = 0
        while stack:
            v = stack.pop()
            seen += 1
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    stack.append(c)
        return seen == self.p

    def fingerprint(self) -> tuple[int, ...]:
        return self._masks

    def __eq__(self, other):
        return isinstance(other, Dag) and self._masks == other._masks

    def __hash__(self):
        return hash(self._masks)

    def __repr__(self):
        return f"Dag({self.edges()})"


def is_consistent(g: Dag, sigma: Ordering) -> bool:
    inv = sigma.inverse
    return all(inv[i] < inv[j] for j, pa in enumerate(g.parents) for i in pa)
