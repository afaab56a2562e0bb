import numpy as np
import pytest

from eqdag import io
from eqdag.dataset import ParseError
from eqdag.graph import Dag, Ordering
from eqdag.mcmc import ChainConfig, run_chain
from eqdag.simulate import SimConfig, simulate


def test_edge_list_round_trip_keeps_isolated_nodes(tmp_path):
    g = Dag.from_edges(5, [(0, 2), (2, 3)])
    io.write_edge_list(tmp_path / "g.txt", g)
    assert (tmp_path / "g.txt").read_text().splitlines() == ["# nodes 5", "1 3", "3 4"]
    assert io.read_edge_list(tmp_path / "g.txt") == g


@pytest.mark.parametrize("body", ["1 x\n", "0 2\n", "1 2 3\n"])
def test_bad_edge_lists(tmp_path, body):
    (tmp_path / "g.txt").write_text(body)
    with pytest.raises(ParseError):
        io.read_edge_list(tmp_path / "g.txt")


def test_label_beyond_p(tmp_path):
    (tmp_path / "g.txt").write_text("1 4\n")
    with pytest.raises(ParseError):
        io.read_edge_list(tmp_path / "g.txt", p=3)


def test_matrix_round_trip_is_exact(tmp_path):
    m = np.random.default_rng(0).standard_normal((4, 3))
    io.write_matrix(tmp_path / "m.csv", m)
    assert np.array_equal(io.read_matrix(tmp_path / "m.csv"), m)


def test_ordering_is_one_based(tmp_path):
    io.write_ordering(tmp_path / "o.json", Ordering([2, 0, 1]))
    assert (tmp_path / "o.json").read_text().strip() == "[3, 1, 2]"
    assert io.read_ordering(tmp_path / "o.json") == Ordering([2, 0, 1])


def test_trace_and_samples_round_trip(tmp_path):
    data = simulate(SimConfig(p=5, n=80, edge_prob=0.4, seed=1)).data
    outs = [run_chain(ChainConfig(iterations=40, seed=s, sample_stride=3), data) for s in (0, 1)]
    io.write_trace(tmp_path / "t.csv", [o.trace for o in outs])
    back = io.read_trace(tmp_path / "t.csv")
    for k, o in enumerate(outs):
        assert np.array_equal(back[k], o.trace)
    io.write_samples(tmp_path / "s.jsonl", outs)
    ind = io.samples_to_indicators(io.read_samples(tmp_path / "s.jsonl"), 5)
    for k, o in enumerate(outs):
        assert np.array_equal(ind[k], o.sample_adjacency())


def test_json_handles_numpy(tmp_path):
    io.write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(3), "c": (1, 2)})
    assert io.read_json(tmp_path / "x.json") == {"a": 1.5, "b": [0, 1, 2], "c": [1, 2]}
