from collections import Counter

import numpy as np
import pytest

from eqdag.evaluate import exact_posterior, total_variation, visit_frequencies
from eqdag.graph import Ordering, TRANSPOSITION, sample_move
from eqdag.mcmc import ChainConfig, MultiChainError, mean_pip, run_chain, run_multichain
from eqdag.score import Hyperparams
from eqdag.selection import SelectionCache, rb_from_masks
from eqdag.simulate import SimConfig, simulate

P3 = SimConfig(p=3, n=100, edge_prob=0.7, weights=("uniform", 0.3, 0.6), seed=4)


@pytest.fixture(scope="module")
def p3():
    return simulate(P3).data


@pytest.fixture(scope="module")
def p8():
    return simulate(SimConfig(p=8, n=150, edge_prob=0.4, seed=9)).data


def test_config_validation():
    assert ChainConfig(iterations=100).burn_in == 50
    assert ChainConfig(iterations=10, neighborhood="rrs").neighborhood == "shuffle"
    for bad in ({"iterations": 10, "burn_in": 10}, {"iterations": 10, "init": "bogus"},
                {"iterations": 10, "score_kind": "x"}, {"iterations": -1},
                {"iterations": 10, "rb_stride": 0}):
        with pytest.raises(ValueError):
            ChainConfig(**bad)


def test_zero_iterations(p3):
    out = run_chain(ChainConfig(iterations=0, burn_in=0), p3)
    assert len(out.trace) == 0
    assert not out.pip.any()
    assert out.effective_iterations == 0


def test_output_invariants(p8):
    out = run_chain(ChainConfig(iterations=400, seed=3, sample_stride=1), p8)
    assert out.pip.min() >= 0 and out.pip.max() <= 1
    assert not np.diag(out.pip).any()
    assert out.effective_iterations == out.trace["nodewise_count"].sum()
    assert np.array_equal(out.trace["iteration"], np.arange(1, 401))
    assert np.all(out.trace["nodewise_count"] == 2)
    assert out.pip_count == 200


def test_pip_is_mean_of_rb_over_samples(p8):
    out = run_chain(ChainConfig(iterations=300, burn_in=100, seed=5, sample_stride=1), p8)
    cache = SelectionCache(p8)
    acc = np.zeros((8, 8))
    for _, perm, masks in out.samples:
        acc += rb_from_masks(Ordering(perm).inverse, masks, cache)
    np.testing.assert_allclose(out.pip, acc / len(out.samples), rtol=1e-12, atol=1e-15)


def test_reproducible(p8):
    cfg = ChainConfig(iterations=200, seed=11, neighborhood="transposition", init="random")
    a, b = run_chain(cfg, p8), run_chain(cfg, p8)
    assert np.array_equal(a.trace, b.trace)
    assert np.array_equal(a.pip, b.pip)
    assert a.final_ordering == b.final_ordering


def test_given_initial_ordering(p8):
    out = run_chain(ChainConfig(iterations=10, init=[7, 6, 5, 4, 3, 2, 1, 0]), p8)
    assert out.initial_ordering == Ordering(range(7, -1, -1))
    with pytest.raises(ValueError):
        run_chain(ChainConfig(iterations=10, init=[0, 1]), p8)


def test_debug_rollback_audit(p8):
    out = run_chain(ChainConfig(iterations=300, seed=2, neighborhood="shuffle", debug=True), p8)
    assert out.acceptance_rate < 1


def test_decomposable_chain_runs(p8):
    out = run_chain(ChainConfig(iterations=200, seed=1, score_kind="decomposable"), p8)
    assert out.warm_start is not None
    assert 0 <= out.pip.min() and out.pip.max() <= 1


def test_max_effective_stops_early(p8):
    out = run_chain(ChainConfig(iterations=1000, seed=1, neighborhood="transposition",
                                max_effective=500), p8)
    assert out.effective_iterations >= 500
    assert out.effective_iterations - out.trace["nodewise_count"][-1] < 500


def test_transposition_cost_matches_formula():
    rng = np.random.default_rng(7)
    p = 12
    touched = [len(sample_move(p, TRANSPOSITION, rng).touched) for _ in range(100_000)]
    se = np.std(touched) / np.sqrt(len(touched))
    assert abs(np.mean(touched) - (p + 4) / 3) < 4 * se


def test_stationary_distribution_p3(p3):
    h = Hyperparams()
    exact = exact_posterior(p3, h).order_probs
    counts = Counter()
    for k in range(3):
        out = run_chain(ChainConfig(iterations=20_000, burn_in=0, seed=k, init="random",
                                    compute_pip=False, track_orderings=True), p3)
        counts.update(out.ordering_counts)
    assert total_variation(visit_frequencies(counts), exact) <= 0.05


def test_detailed_balance_fluxes(p3):
    out = run_chain(ChainConfig(iterations=60_000, burn_in=0, seed=21, init="random",
                                compute_pip=False, sample_stride=1), p3)
    seq = [perm for _, perm, _ in out.samples]
    flux = Counter((a, b) for a, b in zip(seq, seq[1:]) if a != b)
    checked = 0
    for (a, b), n_ab in flux.items():
        n_ba = flux.get((b, a), 0)
        assert abs(n_ab - n_ba) <= 3 * np.sqrt(n_ab + n_ba) + 1
        checked += 1
    assert checked > 0


def test_multichain_matches_single(p8):
    cfg = ChainConfig(iterations=100, seed=40)
    [only] = run_multichain(cfg, 1, p8)
    single = run_chain(cfg, p8)
    assert np.array_equal(only.trace, single.trace)
    a = run_multichain(cfg, 2, p8)
    b = run_multichain(cfg, 2, p8)
    assert np.array_equal(a[0].trace, b[0].trace)
    assert a[1].seed == 41
    pooled = mean_pip(a)
    np.testing.assert_allclose(pooled, (a[0].pip + a[1].pip) / 2)


def test_multichain_parallel_is_identical(p8):
    cfg = ChainConfig(iterations=60, seed=3)
    serial = run_multichain(cfg, 2, p8, jobs=1)
    parallel = run_multichain(cfg, 2, p8, jobs=2)
    for s, q in zip(serial, parallel):
        assert np.array_equal(s.trace, q.trace)
        assert np.array_equal(s.pip, q.pip)


def test_multichain_reports_failures(p8):
    cfg = ChainConfig(iterations=5, init=[0, 1, 2])
    with pytest.raises(MultiChainError) as info:
        run_multichain(cfg, 2, p8)
    assert [k for k, _ in info.value.failures] == [0, 1]
    with pytest.raises(ValueError):
        run_multichain(cfg, 0, p8)
