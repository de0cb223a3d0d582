"""Independent reference computations.  None of these import the solver code
they check; they only share the plain data types."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog


def floyd_warshall(w: np.ndarray) -> np.ndarray:
    """Shortest-path closure: the standard repair of a symmetric positive matrix into a metric."""
    d = np.array(w, dtype=float)
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    return d


def random_metric(rng, n: int) -> np.ndarray:
    a = rng.uniform(0.1, 3.0, size=(n, n))
    a = np.triu(a, 1)
    a = a + a.T
    return floyd_warshall(a)


def matching_cost(dist, sources, sinks, exhaustive: bool = False) -> float:
    """Cheapest perfect matching of unit masses; ``exhaustive`` walks every permutation."""
    if not sources:
        return 0.0
    C = dist[np.ix_(sources, sinks)]
    if exhaustive:
        k = len(sources)
        return min(sum(C[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))
    r, c = linear_sum_assignment(C)
    return float(C[r, c].sum())


def brute_lvar(dist, atoms, unit: float = 1.0, exhaustive: bool = False) -> float:
    """LVar of ``sum_i m_i unit (delta_{x_i} - delta_{y_i})`` with integer multiplicities.

    Every sign pattern is tried and every atom expanded to unit masses (no netting):
    the transport between the + and - unit lists is a perfect matching.
    """
    best = 0.0
    for signs in itertools.product((1, -1), repeat=len(atoms)):
        plus, minus = [], []
        for (x, y, m), s in zip(atoms, signs):
            a, b = (x, y) if s > 0 else (y, x)
            plus += [a] * m
            minus += [b] * m
        best = max(best, matching_cost(dist, plus, minus, exhaustive))
    return best * unit


def lp_transport(cost, supply, demand) -> float:
    m, n = cost.shape
    A_eq, b_eq = [], []
    for i in range(m):
        row = np.zeros(m * n)
        row[i * n:(i + 1) * n] = 1
        A_eq.append(row)
        b_eq.append(supply[i])
    for j in range(n):
        row = np.zeros(m * n)
        row[j::n] = 1
        A_eq.append(row)
        b_eq.append(demand[j])
    res = linprog(cost.ravel(), A_eq=np.array(A_eq), b_eq=b_eq, bounds=(0, None), method="highs")
    return float(res.fun)


def lp_kantorovich(dist, charge) -> float:
    """``max sum c_i f_i`` over 1-Lipschitz f as a linear program."""
    n = len(charge)
    rows = []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(n)
                r[i], r[j] = 1, -1
                rows.append((r, dist[i, j]))
    A = np.array([r for r, _ in rows])
    b = np.array([v for _, v in rows])
    res = linprog(-np.asarray(charge), A_ub=A, b_ub=b, bounds=[(0, 0)] + [(None, None)] * (n - 1), method="highs")
    return float(-res.fun)


def max_slope(dist, f) -> float:
    """Exhaustive pairwise Lipschitz constant."""
    f = np.asarray(f, dtype=float)
    n = len(f)
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            worst = max(worst, abs(f[i] - f[j]) / dist[i, j])
    return worst


def phi_gap_closed_form(n0: int, D: int, q: float) -> float:
    """For q < 1/3 the first differing level fixes the sign of Phi(x) - Phi(y)
    (its weight beats the whole tail), so E|.| is a sum over that level."""
    assert q < 1 / 3
    return sum(0.5 ** (t - n0 + 1) * q ** t for t in range(n0, D + 1))


def phi_gap_enumerated(n0: int, D: int, q: float) -> float:
    """Plain enumeration over both points' bits (4**m terms)."""
    m = D - n0 + 1
    total = 0.0
    for bits in itertools.product((0, 1), repeat=2 * m):
        s = sum(q ** (n0 + t) * (bits[t] - bits[m + t]) for t in range(m))
        total += abs(s)
    return total / 4 ** m


def laakso_traversal_by_enumeration(stage, level: int) -> dict:
    """Fraction of all left-to-right paths of G_level that use each edge."""
    from lcjlab.generators import laakso_paths

    paths = laakso_paths(stage, level)
    counts: dict = {}
    for p in paths:
        for a, b in zip(p, p[1:]):
            counts[(a, b)] = counts.get((a, b), 0) + 1
    return {e: Fraction(c, len(paths)) for e, c in counts.items()}


def tree_atom_geometry(N: int):
    """Direct (k, j, l) -> (v, v', U) from depth arithmetic on leaf positions."""
    D = 2 ** N
    out = {}
    for k in range(N + 1):
        seg = 2 ** (N - k)
        for j in range(2 ** D):
            for ell in range(1, 2 ** k + 1):
                def vert(depth):
                    return (depth, j >> (D - depth))
                u = vert((2 * ell - 1) * seg // 2) if k < N else None
                out[(k, j + 1, ell)] = (vert((ell - 1) * seg), vert(ell * seg), u)
    return out


def dyadic_tree_distance(a, b) -> int:
    """Graph distance between (depth, pos) vertices of a binary tree."""
    (da, pa), (db, pb) = a, b
    while da > db:
        da, pa = da - 1, pa >> 1
    while db > da:
        db, pb = db - 1, pb >> 1
    up = 0
    while pa != pb:
        pa, pb, up = pa >> 1, pb >> 1, up + 1
    return (a[0] - da) + (b[0] - db) + 2 * up


def sixpoint_ratio(A, B, C, D, P, Q) -> float:
    lhs = (2 * abs(D + 3 * A - 4 * B) + 2 * abs(A + 3 * D - 4 * C) + abs(D - A + 4 * B - 4 * P)
           + abs(D - A - 4 * C + 4 * P) + abs(D - A + 4 * B - 4 * Q) + abs(D - A - 4 * C + 4 * Q))
    return lhs / abs(P - Q) if P != Q else math.inf
