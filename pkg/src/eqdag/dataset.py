"""Observation matrix, Gram quantities and residual sums of squares.

All RSS values are computed from the Gram matrix by a Cholesky
elimination of the augmented matrix ``[[G_SS, G_Sj], [G_jS, G_jj]]`` with
the parent indices in sorted order.  The value for a given ``(j, S)`` is
therefore a pure function of the node and the *set* ``S``: whichever search
path first asks for it, the bits are the same.  The selection engine relies
on this for exact agreement between incremental and from-scratch updates.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-10
LOWER_BOUND_FLOOR = 1e-8


class DataError(ValueError):
    """Invalid or degenerate data."""


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DegenerateDesignError(DataError):
    def __init__(self, j, parents):
        self.node = j
        self.parents = tuple(sorted(parents))
        super().__init__(
            f"Gram submatrix of parent set {list(self.parents)} for node {j} "
            f"is singular or ill-conditioned"
        )


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An ``n x p`` observation matrix together with its Gram matrix.

    Rows are observations and columns are node variables.  Instances are
    immutable and may be shared between chains.
    """

    values: np.ndarray
    names: tuple[str, ...] | None = None
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError("data matrix must be two-dimensional")
        n, p = values.shape
        if n < 2 or p < 2:
            raise DataError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise ParseError("non-finite value", row=int(r) + 1, column=int(c) + 1)
        gram = values.T @ values
        gram = 0.5 * (gram + gram.T)
        zero = np.flatnonzero(np.diag(gram) <= 0)
        if zero.size:
            raise DataError(f"column {int(zero[0]) + 1} is identically zero")
        if self.names is not None and len(self.names) != p:
            raise DataError("number of names does not match number of columns")
        values.flags.writeable = False
        gram.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gram", gram)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def standardized(self) -> "DataMatrix":
        """Centered columns scaled to unit sample variance."""
        x = self.values - self.values.mean(axis=0)
        sd = x.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise DataError("cannot standardize a constant column")
        return DataMatrix(x / sd, names=self.names)


@dataclass(frozen=True)
class RssBounds:
    lower: np.ndarray
    upper: np.ndarray
    floored: tuple[int, ...] = ()


def load_matrix(path, has_header: bool = False) -> DataMatrix:
    """Read a comma-separated matrix, one observation per row."""
    path = Path(path)
    rows = []
    names = None
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or all(not cell.strip() for cell in row):
                    continue
                if has_header and names is None:
                    names = tuple(cell.strip() for cell in row)
                    continue
                rows.append((lineno, row))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError("no data rows", row=None)
    width = len(rows[0][1]) if names is None else len(names)
    out = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", row=lineno)
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a number", row=lineno,
                                 column=c + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", row=lineno, column=c + 1)
            out[r, c] = v
    if out.shape[0] < 2 or out.shape[1] < 2:
        raise ParseError(f"need at least 2 rows and 2 columns, got {out.shape}")
    return DataMatrix(out, names=names)


def save_matrix(path, values, names: Sequence[str] | None = None, fmt="%.17g"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with Path(path).open("w", newline="") as fh:
        if names is not None:
            fh.write(",".join(names) + "\n")
        for row in values:
            fh.write(",".join(fmt % v for v in row) + "\n")


def rss_batch(gram: np.ndarray, j: int, parent_idx: np.ndarray,
              tol: float = PIVOT_TOL) -> np.ndarray:
    """Residual sums of squares of node ``j`` on many parent sets at once.

    Parameters
    ----------
    gram : (p, p) array
    j : int
    parent_idx : (m, k) int array
        One parent set per row, each sorted ascending, none containing ``j``.
    tol : float
        A pivot below ``tol * max(diag(G_SS))`` marks the set as degenerate.

    Returns
    -------
    (m,) array with ``nan`` in rows whose Gram submatrix is degenerate.

    Only elementwise array operations are used along the batch axis, so the
    value for one parent set does not depend on which other sets share the
    batch.
    """
    parent_idx = np.asarray(parent_idx, dtype=np.intp)
    m, k = parent_idx.shape
    if k == 0:
        return np.full(m, gram[j, j])
    full = np.empty((m, k + 1), dtype=np.intp)
    full[:, :k] = parent_idx
    full[:, k] = j
    a = gram[full[:, :, None], full[:, None, :]]
    scale = gram[parent_idx, parent_idx].max(axis=1) * tol
    ok = np.ones(m, dtype=bool)
    for c in range(k):
        piv = a[:, c, c]
        bad = ~(piv >= scale)
        if bad.any():
            ok &= ~bad
            piv = np.where(bad, 1.0, piv)
        col = a[:, c + 1:, c] / np.sqrt(piv)[:, None]
        a[:, c + 1:, c + 1:] -= col[:, :, None] * col[:, None, :]
    out = np.maximum(a[:, k, k], 0.0)
    out[~ok] = np.nan
    return out


def rss(data: DataMatrix, j: int, parents: Iterable[int]) -> float:
    """``X_j' (I - P_S) X_j`` for parent set ``S``.

    Degeneracy is judged on the Gram matrix exactly as in :func:`rss_batch`,
    but the value comes from a QR factorization of the raw columns, which
    stays accurate for nearly collinear designs where the Gram route loses
    about twice as many digits.
    """
    s = sorted(set(int(i) for i in parents))
    if j in s:
        raise ValueError(f"node {j} cannot be its own parent")
    if any(i < 0 or i >= data.p for i in s) or not 0 <= j < data.p:
        raise IndexError("node index out of range")
    if not s:
        return float(data.gram[j, j])
    val = rss_batch(data.gram, j, np.array([s], dtype=np.intp))[0]
    if np.isnan(val):
        raise DegenerateDesignError(j, s)
    r = np.linalg.qr(data.values[:, s + [j]], mode="r")
    return float(r[-1, -1] ** 2)


def rss_bounds(data: DataMatrix) -> RssBounds:
    """Ordering-free bounds on every node's RSS.

    ``upper[j]`` is ``X_j'X_j``.  When ``p < n`` the lower bound is the RSS
    on all other columns; otherwise, or when that regression is degenerate,
    it falls back to ``1e-8 * upper[j]``.
    """
    p, n = data.p, data.n
    upper = np.diag(data.gram).copy()
    if np.any(upper <= 0):
        raise DataError("constant-zero column")
    lower = LOWER_BOUND_FLOOR * upper
    floored = []
    if p < n:
        for j in range(p):
            others = np.array([[i for i in range(p) if i != j]], dtype=np.intp)
            v = rss_batch(data.gram, j, others)[0]
            if np.isnan(v) or not v > 0:
                floored.append(j)
            else:
                lower[j] = v
    else:
        floored = list(range(p))
    if floored:
        log.warning("RSS lower bound floored at %g * upper for nodes %s",
                    LOWER_BOUND_FLOOR, floored)
    return RssBounds(lower=lower, upper=upper, floored=tuple(floored))
