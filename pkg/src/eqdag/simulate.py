"""Random linear Gaussian SEMs with a known DAG.

The true ordering is always the identity: edge ``i -> j`` can only appear
when ``i < j``.  Use :func:`permute_truth` to relabel nodes afterwards.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dataset import DataMatrix
from .graph import Dag


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    p, n : int
        Number of nodes and of samples.
    edge_prob : float or None
        Probability of each forward edge; ``None`` means ``3 / (2p - 2)``,
        which gives ``3p/4`` edges on average.
    weights : ``("uniform", lo, hi)`` or ``("normal",)``
        Edge weights are either uniform on ``[-hi, -lo] U [lo, hi]`` or
        standard normal.
    variances : ``("equal", omega)`` or ``("heterogeneous", b)``
        Error variances are either all ``omega`` or i.i.d. uniform on
        ``[1 - b, 1 + b]``.
    seed : int
    """

    p: int
    n: int
    edge_prob: float | None = None
    weights: tuple = ("uniform", 0.3, 1.0)
    variances: tuple = ("equal", 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.edge_prob is None:
            object.__setattr__(self, "edge_prob", 3.0 / (2 * self.p - 2))
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError("edge_prob must lie in [0, 1]")
        w = tuple(self.weights)
        object.__setattr__(self, "weights", w)
        if w[0] == "uniform":
            if len(w) != 3 or not 0 <= w[1] <= w[2]:
                raise ValueError("uniform weights need 0 <= lo <= hi")
        elif w[0] == "normal":
            if len(w) != 1:
                raise ValueError("normal weights take no parameters")
        else:
            raise ValueError(f"unknown weight distribution {w[0]!r}")
        v = tuple(self.variances)
        object.__setattr__(self, "variances", v)
        if len(v) != 2:
            raise ValueError("variances must be ('equal', omega) or ('heterogeneous', b)")
        if v[0] == "equal":
            if not v[1] > 0:
                raise ValueError("equal error variance must be positive")
        elif v[0] == "heterogeneous":
            if not 0 <= v[1] < 1:
                raise ValueError("heterogeneity b must lie in [0, 1)")
        else:
            raise ValueError(f"unknown variance model {v[0]!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        d["variances"] = list(self.variances)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)


@dataclass
class GroundTruth:
    dag: Dag
    weights: np.ndarray
    variances: np.ndarray
    data: DataMatrix | None = None
    ordering: tuple = field(default=())

    def __post_init__(self):
        if not self.ordering:
            self.ordering = tuple(range(self.dag.p))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


def sample_truth(cfg: SimConfig, rng: np.random.Generator) -> GroundTruth:
    """Draw ``G*``, ``B*`` and the error variances (no data)."""
    p = cfg.p
    upper = np.triu(np.ones((p, p), dtype=bool), k=1)
    present = (rng.random((p, p)) < cfg.edge_prob) & upper
    if cfg.weights[0] == "uniform":
        _, lo, hi = cfg.weights
        mag = rng.uniform(lo, hi, size=(p, p))
        sign = np.where(rng.random((p, p)) < 0.5, -1.0, 1.0)
        w = sign * mag
    else:
        w = rng.standard_normal((p, p))
    w = np.where(present, w, 0.0)
    # a zero draw would silently drop an edge from the weight matrix
    present &= w != 0
    kind, par = cfg.variances
    if kind == "equal":
        omega = np.full(p, float(par))
    else:
        omega = rng.uniform(1 - par, 1 + par, size=p)
    dag = Dag.from_adjacency(present)
    return GroundTruth(dag=dag, weights=w, variances=omega)


def gen_data(truth: GroundTruth, n: int, rng: np.random.Generator) -> DataMatrix:
    """Sample ``n`` i.i.d. rows from the SEM, columns in topological order."""
    if n < 2:
        raise ValueError("n must be at least 2")
    b, omega = truth.weights, truth.variances
    p = b.shape[0]
    x = rng.standard_normal((n, p)) * np.sqrt(omega)
    order = truth.ordering
    for j in order:
        pa = np.flatnonzero(b[:, j])
        if pa.size:
            x[:, j] += x[:, pa] @ b[pa, j]
    return DataMatrix(x)


def simulate(cfg: SimConfig) -> GroundTruth:
    """Truth and data from a single seeded stream."""
    rng = make_rng(cfg.seed)
    truth = sample_truth(cfg, rng)
    truth.data = gen_data(truth, cfg.n, rng)
    return truth


def population_covariance(weights, variances) -> np.ndarray:
    """``(I - B)^{-T} diag(omega) (I - B)^{-1}``."""
    b = np.asarray(weights, dtype=float)
    p = b.shape[0]
    a = np.linalg.inv(np.eye(p) - b)
    return a.T @ np.diag(np.asarray(variances, dtype=float)) @ a


def permute_truth(truth: GroundTruth, perm) -> GroundTruth:
    """Relabel nodes so that old node ``perm[k]`` becomes node ``k``."""
    perm = np.asarray(perm)
    p = len(perm)
    if sorted(perm.tolist()) != list(range(p)):
        raise ValueError("perm must be a permutation")
    new_of_old = np.empty(p, dtype=int)
    new_of_old[perm] = np.arange(p)
    w = truth.weights[np.ix_(perm, perm)]
    data = None
    if truth.data is not None:
        data = DataMatrix(truth.data.values[:, perm])
    ordering = tuple(int(new_of_old[v]) for v in truth.ordering)
    return GroundTruth(Dag.from_adjacency(w != 0), w, truth.variances[perm], data, ordering)


PRESETS = {
    "mixing": SimConfig(p=20, n=1000, edge_prob=0.1, weights=("uniform", 0.5, 1.0)),
    "uniform-strong": SimConfig(p=40, n=500, weights=("uniform", 0.3, 1.0)),
    "uniform-weak": SimConfig(p=40, n=500, weights=("uniform", 0.1, 1.0)),
    "normal": SimConfig(p=40, n=500, weights=("normal",)),
    "hetero-narrow": SimConfig(p=40, n=500, variances=("heterogeneous", 0.3)),
    "hetero-wide": SimConfig(p=40, n=500, variances=("heterogeneous", 0.5)),
}

SWEEP_B = tuple(round(0.1 * k, 1) for k in range(10))


def heterogeneity_sweep(base: SimConfig | None = None, bs=SWEEP_B) -> list[SimConfig]:
    """One config per heterogeneity level ``b``."""
    base = base or PRESETS["uniform-strong"]
    return [replace(base, variances=("heterogeneous", b)) for b in bs]


def preset(name: str, **overrides) -> SimConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides)


def strong_truth_p4() -> GroundTruth:
    """Fixed four-node SEM with large weights and unit error variances."""
    b = np.zeros((4, 4))
    b[0, 1], b[1, 2], b[0, 3], b[2, 3] = 0.8, -0.7, 0.6, 0.9
    return GroundTruth(Dag.from_adjacency(b != 0), b, np.ones(4))


def with_data(truth: GroundTruth, n: int, seed: int) -> GroundTruth:
    """Copy of ``truth`` carrying a fresh sample of size ``n``."""
    data = gen_data(truth, n, make_rng(seed))
    return GroundTruth(truth.dag, truth.weights, truth.variances, data, truth.ordering)
