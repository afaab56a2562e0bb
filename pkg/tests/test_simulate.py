import numpy as np
import pytest

from eqdag.graph import Dag, Ordering, is_consistent
from eqdag.simulate import (PRESETS, SWEEP_B, GroundTruth, SimConfig, gen_data,
                            heterogeneity_sweep, make_rng, permute_truth,
                            population_covariance, preset, sample_truth, simulate,
                            strong_truth_p4)


def test_config_validation():
    assert SimConfig(p=40, n=10).edge_prob == pytest.approx(3 / 78)
    for bad in ({"edge_prob": 1.5}, {"weights": ("uniform", 1.0, 0.5)},
                {"weights": ("cauchy",)}, {"variances": ("equal", 0.0)},
                {"variances": ("heterogeneous", 1.0)}, {"p": 1}):
        with pytest.raises(ValueError):
            SimConfig(**{"p": 5, "n": 10, **bad})


def test_no_edges_when_prob_zero():
    t = sample_truth(SimConfig(p=6, n=10, edge_prob=0.0), make_rng(0))
    assert t.dag.edge_count == 0 and not t.weights.any()


def test_expected_edge_count_p40():
    rng = make_rng(1)
    cfg = SimConfig(p=40, n=10)
    counts = np.array([sample_truth(cfg, rng).dag.edge_count for _ in range(10_000)])
    se = counts.std() / np.sqrt(len(counts))
    assert abs(counts.mean() - 30) < 4 * se


def test_weight_support_and_structure():
    t = sample_truth(SimConfig(p=30, n=10, edge_prob=0.5, weights=("uniform", 0.3, 1.0)), make_rng(2))
    w = t.weights[t.weights != 0]
    assert np.all((np.abs(w) >= 0.3) & (np.abs(w) <= 1.0))
    assert (t.weights != 0).sum() == t.dag.edge_count
    assert np.array_equal(t.weights != 0, t.dag.adjacency().astype(bool))
    assert is_consistent(t.dag, Ordering.identity(30))
    assert (w > 0).any() and (w < 0).any()


def test_heterogeneous_variances_range():
    t = sample_truth(SimConfig(p=200, n=10, variances=("heterogeneous", 0.3)), make_rng(3))
    assert t.variances.min() >= 0.7 and t.variances.max() <= 1.3


def test_independent_columns_covariance():
    t = GroundTruth(Dag.empty(5), np.zeros((5, 5)), np.ones(5))
    x = gen_data(t, 10_000, make_rng(4)).values
    assert np.linalg.norm(x.T @ x / 10_000 - np.eye(5)) < 0.2


def test_two_node_chain_moments():
    b = np.array([[0.0, 1.0], [0.0, 0.0]])
    t = GroundTruth(Dag.from_adjacency(b != 0), b, np.ones(2))
    x = gen_data(t, 100_000, make_rng(5)).values
    c = np.cov(x.T)
    assert c[1, 1] == pytest.approx(2.0, rel=0.02)
    assert c[0, 1] == pytest.approx(1.0, rel=0.02)
    np.testing.assert_allclose(population_covariance(b, [1, 1]), [[1, 1], [1, 2]])


def test_seeded_data_is_bit_identical():
    cfg = PRESETS["uniform-strong"]
    a, b = simulate(cfg), simulate(cfg)
    assert np.array_equal(a.data.values, b.data.values)
    assert a.dag == b.dag


def test_empirical_covariance_approaches_population():
    t = simulate(SimConfig(p=6, n=40_000, edge_prob=0.5, seed=6))
    sigma = population_covariance(t.weights, t.variances)
    emp = t.data.values.T @ t.data.values / 40_000
    assert np.max(np.abs(emp - sigma)) < 6 * np.sqrt(np.max(np.diag(sigma)) ** 2 / 40_000) * 3


def test_source_variance_is_minimal():
    for seed in range(20):
        t = sample_truth(SimConfig(p=15, n=10, edge_prob=0.3, seed=seed), make_rng(seed))
        diag = np.diag(population_covariance(t.weights, t.variances))
        has_parent = t.weights.any(axis=0)
        assert np.all(diag[has_parent] > 1.0)
        np.testing.assert_allclose(diag[~has_parent], 1.0)


def test_presets_and_sweep():
    assert SWEEP_B == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    sweep = heterogeneity_sweep()
    assert [c.variances for c in sweep] == [("heterogeneous", b) for b in SWEEP_B]
    assert preset("mixing").edge_prob == 0.1
    assert preset("hetero-narrow").variances == ("heterogeneous", 0.3)
    assert preset("hetero-wide").variances == ("heterogeneous", 0.5)
    assert preset("uniform-strong", seed=9).seed == 9
    with pytest.raises(ValueError):
        preset("nope")


def test_permute_truth_relabels_consistently():
    t = simulate(SimConfig(p=5, n=50, edge_prob=0.6, seed=7))
    perm = [3, 0, 4, 1, 2]
    u = permute_truth(t, perm)
    for i, j in t.dag.edges():
        assert (perm.index(i), perm.index(j)) in u.dag.edges()
    assert np.array_equal(u.data.values, t.data.values[:, perm])
    assert is_consistent(u.dag, Ordering(u.ordering))


def test_strong_truth():
    t = strong_truth_p4()
    assert t.dag.edges() == [(0, 1), (0, 3), (1, 2), (2, 3)]
