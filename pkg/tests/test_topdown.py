import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqdag.dataset import DataMatrix
from eqdag.graph import Dag, Ordering
from eqdag.selection import SelectionCache
from eqdag.simulate import GroundTruth, SimConfig, gen_data, make_rng, preset, simulate
from eqdag.topdown import itd, std


def test_smaller_variance_goes_first(rng):
    x = rng.standard_normal((50, 2))
    cache = SelectionCache(DataMatrix(x))
    assert std([2.0, 5.0], None, cache).ordering == Ordering([0, 1])
    assert std([5.0, 2.0], None, cache).ordering == Ordering([1, 0])


def test_ties_break_to_lowest_index():
    col = np.array([1.0, -1.0, 2.0, 0.5, -0.5])
    x = np.column_stack([col, col, col])
    cache = SelectionCache(DataMatrix(x))
    res = std(np.diag(cache.gram), None, cache)
    assert res.ordering == Ordering([0, 1, 2])


def test_rejects_bad_init(rng):
    cache = SelectionCache(DataMatrix(rng.standard_normal((20, 3))))
    with pytest.raises(ValueError):
        std([1.0, 0.0, 2.0], None, cache)
    with pytest.raises(ValueError):
        std([1.0, 2.0], None, cache)
    with pytest.raises(ValueError):
        itd(None, cache, max_outer=0)


def test_chain_recovered():
    b = np.zeros((3, 3))
    b[0, 1] = b[1, 2] = 1.0
    truth = GroundTruth(Dag.from_adjacency(b != 0), b, np.ones(3))
    hits = 0
    for r in range(30):
        data = gen_data(truth, 1000, make_rng(900 + r))
        cache = SelectionCache(data)
        hits += std(np.diag(cache.gram), data, cache).ordering == Ordering([0, 1, 2])
    assert hits >= 28


def test_empty_truth_converges_in_two_passes():
    x = np.random.default_rng(4).standard_normal((5000, 6))
    res = itd(DataMatrix(x), SelectionCache(DataMatrix(x)))
    assert res.converged and res.outer_iterations == 2


def test_single_pass_cap():
    tr = simulate(preset("uniform-strong", seed=2))
    res = itd(tr.data, SelectionCache(tr.data), max_outer=1)
    assert res.outer_iterations == 1 and not res.converged


def test_exhaustive_mode_agrees_on_easy_instance():
    tr = simulate(SimConfig(p=6, n=800, edge_prob=0.5, weights=("uniform", 0.5, 1.0), seed=1))
    cache = SelectionCache(tr.data)
    a = itd(tr.data, cache)
    b = itd(tr.data, cache, exhaustive=True)
    assert a.ordering == b.ordering


@given(st.integers(0, 10_000))
@settings(max_examples=20)
def test_std_properties(seed):
    tr = simulate(SimConfig(p=7, n=150, edge_prob=0.4, seed=seed))
    cache = SelectionCache(tr.data)
    init = np.diag(cache.gram).copy()
    res = std(init, tr.data, cache)
    assert sorted(res.ordering.perm) == list(range(7))
    assert np.all(res.rss > 0)
    # first pass starts from X'X, so projection can only shrink each entry
    assert np.all(res.rss <= init)


@given(st.integers(0, 10_000))
@settings(max_examples=15)
def test_itd_fixed_point(seed):
    tr = simulate(SimConfig(p=8, n=200, seed=seed))
    cache = SelectionCache(tr.data)
    res = itd(tr.data, cache)
    if res.converged:
        assert std(res.rss, tr.data, cache).ordering == res.ordering
    assert res.outer_iterations >= 1
