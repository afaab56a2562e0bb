"""Slow, direct reference implementations used only by the tests.

Nothing here imports the package's selection or scoring code; each function
recomputes its quantity from the raw data matrix.
"""

import itertools
import math

import numpy as np


def normal_eq_rss(x, j, parents):
    """RSS of column j on columns ``parents`` by solving the normal equations."""
    y = x[:, j]
    parents = sorted(parents)
    if not parents:
        return float(y @ y)
    a = x[:, parents]
    beta = np.linalg.solve(a.T @ a, a.T @ y)
    res = y - a @ beta
    return float(res @ res)


def penalty(p, c0=3.0, alpha=0.99, gamma=0.01):
    return c0 * math.log(p) + 0.5 * math.log(1 + alpha / gamma)


def phi_direct(x, parents, c0=3.0, alpha=0.99, gamma=0.01, kappa=0.0):
    """Equal-variance score of the DAG with parent sets ``parents``."""
    n, p = x.shape
    r = [normal_eq_rss(x, j, pa) for j, pa in enumerate(parents)]
    e = sum(len(pa) for pa in parents)
    return -e * penalty(p, c0, alpha, gamma) - (alpha * p * n + kappa) / 2 * math.log(sum(r))


def phi_prime_direct(x, parents, c0=3.0, alpha=0.99, gamma=0.01, kappa=0.0):
    """Score-equivalent baseline with per-node log RSS."""
    n, p = x.shape
    r = [normal_eq_rss(x, j, pa) for j, pa in enumerate(parents)]
    e = sum(len(pa) for pa in parents)
    return -e * penalty(p, c0, alpha, gamma) - (alpha * n + kappa) / 2 * sum(math.log(v) for v in r)


def best_subset(x, j, pool, offset, d_in, c0=3.0, alpha=0.99, gamma=0.01, kappa=0.0):
    """Exhaustive maximizer of the nodewise score (first maximizer in size, then lex order)."""
    n, p = x.shape
    k1 = (alpha * p * n + kappa) / 2
    best, arg = -math.inf, ()
    for size in range(min(d_in, len(pool)) + 1):
        for s in itertools.combinations(sorted(pool), size):
            v = -size * penalty(p, c0, alpha, gamma) - k1 * math.log(offset + normal_eq_rss(x, j, s))
            if v > best:
                best, arg = v, s
    return set(arg), best


def rb_two_graph(x, perm, parents, **hyper):
    """Conditional edge probabilities by scoring both graphs of every toggle."""
    p = x.shape[1]
    pos = {v: k for k, v in enumerate(perm)}
    out = np.zeros((p, p))
    for j in range(p):
        for i in range(p):
            if pos[i] >= pos[j]:
                continue
            with_e = [set(pa) for pa in parents]
            without = [set(pa) for pa in parents]
            with_e[j].add(i)
            without[j].discard(i)
            a = phi_direct(x, with_e, **hyper)
            b = phi_direct(x, without, **hyper)
            out[i, j] = math.exp(a - np.logaddexp(a, b))
    return out


def loop_metrics(gt, ge):
    p = len(gt)
    hd = sum(abs(gt[i][j] - ge[i][j]) for i in range(p) for j in range(p))
    n_true = sum(gt[i][j] for i in range(p) for j in range(p))
    mass = sum(ge[i][j] for i in range(p) for j in range(p))
    fn = sum(gt[i][j] * (1 - ge[i][j]) for i in range(p) for j in range(p))
    fd = sum((1 - gt[i][j]) * ge[i][j] for i in range(p) for j in range(p))
    fl = sum(gt[j][i] * ge[i][j] for i in range(p) for j in range(p))
    return hd, 100 * fn / n_true, (100 * fd / mass if mass else 0.0), 100 * fl / n_true


def loop_gr(streams):
    """Scalar potential scale reduction for one indicator, from its per-chain streams."""
    m, n = len(streams), len(streams[0])
    means = [sum(s) / n for s in streams]
    grand = sum(means) / m
    b = n / (m - 1) * sum((mu - grand) ** 2 for mu in means)
    w = sum(sum((v - mu) ** 2 for v in s) / (n - 1) for s, mu in zip(streams, means)) / m
    v = (n - 1) / n * w + (m + 1) / (m * n) * b
    if w == 0:
        return math.inf if b > 0 else 1.0
    return math.sqrt(v / w)


def enumerate_order_posterior(x, d_in, **hyper):
    """Ordering posterior with exact per-ordering argmax, via nested loops."""
    n, p = x.shape
    logs = {}
    for perm in itertools.permutations(range(p)):
        choices = []
        for k, j in enumerate(perm):
            pool = perm[:k]
            choices.append([s for size in range(min(d_in, k) + 1)
                            for s in itertools.combinations(sorted(pool), size)])
        best = -math.inf
        for combo in itertools.product(*choices):
            parents = [()] * p
            for j, s in zip(perm, combo):
                parents[j] = s
            best = max(best, phi_direct(x, parents, **hyper))
        logs[perm] = best
    top = max(logs.values())
    z = sum(math.exp(v - top) for v in logs.values())
    return {k: math.exp(v - top) / z for k, v in logs.items()}
