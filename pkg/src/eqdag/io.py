"""On-disk formats.

Edge lists are text with one ``i j`` line per edge ``i -> j`` and 1-based
node labels; a leading ``# nodes <p>`` comment keeps isolated nodes.
Orderings in JSON are 1-based as well.  Matrices are plain CSV.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dataset import ParseError, save_matrix
from .graph import Dag, Ordering

TRACE_FIELDS = ("iteration", "log_score", "accepted", "nodewise_count", "effective_cum")


def write_edge_list(path, dag: Dag):
    write_edges(path, dag.p, dag.edges())


def write_edges(path, p: int, edges):
    """Edge list from raw 0-based pairs; no acyclicity check."""
    with open(path, "w") as fh:
        fh.write(f"# nodes {p}\n")
        for i, j in edges:
            fh.write(f"{int(i) + 1} {int(j) + 1}\n")


def read_edge_list(path, p: int | None = None) -> Dag:
    edges = []
    declared = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                parts = s[1:].split()
                if len(parts) == 2 and parts[0] == "nodes":
                    declared = int(parts[1])
                continue
            parts = s.split()
            try:
                i, j = (int(v) for v in parts)
            except ValueError:
                raise ParseError(f"{path}: expected 'i j' on line {lineno}, got {s!r}",
                                 row=lineno) from None
            if i < 1 or j < 1:
                raise ParseError(f"{path}: node labels are 1-based (line {lineno})", row=lineno)
            edges.append((i - 1, j - 1))
    if p is None:
        p = declared if declared is not None else 1 + max((max(e) for e in edges), default=-1)
    if any(max(e) >= p for e in edges):
        raise ParseError(f"{path}: node label exceeds p={p}")
    return Dag.from_edges(p, edges)


def write_matrix(path, m):
    save_matrix(path, np.asarray(m, dtype=float))


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_trace(path, traces):
    """Write one or several chain traces; the first column is the chain index."""
    if isinstance(traces, np.ndarray):
        traces = [traces]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("chain",) + TRACE_FIELDS)
        for k, tr in enumerate(traces):
            for rec in tr:
                w.writerow((k, int(rec["iteration"]), repr(float(rec["log_score"])),
                            int(bool(rec["accepted"])), int(rec["nodewise_count"]),
                            int(rec["effective_cum"])))


def read_trace(path) -> dict:
    """Return ``{chain: structured array}``."""
    from .mcmc import TRACE_DTYPE

    rows: dict = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            k = int(rec["chain"])
            rows.setdefault(k, []).append((int(rec["iteration"]), float(rec["log_score"]),
                                           bool(int(rec["accepted"])),
                                           int(rec["nodewise_count"]),
                                           int(rec["effective_cum"])))
    return {k: np.array(v, dtype=TRACE_DTYPE) for k, v in rows.items()}


def write_samples(path, outputs):
    """Thinned ``(ordering, DAG)`` samples of every chain as JSON lines."""
    with open(path, "w") as fh:
        for k, out in enumerate(outputs):
            for t, perm, masks in out.samples:
                dag = Dag.from_masks(masks)
                rec = {
                    "chain": k,
                    "iteration": t,
                    "ordering": [v + 1 for v in perm],
                    "edges": [[i + 1, j + 1] for i, j in dag.edges()],
                }
                fh.write(json.dumps(rec) + "\n")


def read_samples(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def samples_to_indicators(records, p: int) -> dict:
    """Group sample records by chain into ``(length, p, p)`` 0/1 arrays."""
    by_chain: dict = {}
    for rec in records:
        by_chain.setdefault(rec["chain"], []).append(rec)
    out = {}
    for k, recs in by_chain.items():
        recs.sort(key=lambda r: r["iteration"])
        a = np.zeros((len(recs), p, p), dtype=np.int8)
        for t, rec in enumerate(recs):
            for i, j in rec["edges"]:
                a[t, i - 1, j - 1] = 1
        out[k] = a
    return out


def write_ordering(path, sigma: Ordering):
    Path(path).write_text(json.dumps([v + 1 for v in sigma.perm]) + "\n")


def read_ordering(path) -> Ordering:
    return Ordering(v - 1 for v in json.loads(Path(path).read_text()))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
