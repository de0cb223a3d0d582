"""Min-cost transport by successive shortest paths with node potentials.

Dense formulation for small supports: sources ``0..m-1``, sinks ``m..m+n-1``,
a super source ``S`` and super sink ``T``.  Dijkstra runs on reduced costs,
which stay nonnegative on every residual edge, so the final potentials are an
optimal dual pair for free.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import PropertyCheckError, ValidationError


def _dijkstra(w: np.ndarray, src: int) -> tuple[np.ndarray, np.ndarray]:
    V = w.shape[0]
    dist = np.full(V, np.inf)
    pred = np.full(V, -1)
    done = np.zeros(V, dtype=bool)
    dist[src] = 0.0
    for _ in range(V):
        masked = np.where(done, np.inf, dist)
        u = int(np.argmin(masked))
        if not np.isfinite(masked[u]):
            break
        done[u] = True
        cand = dist[u] + w[u]
        better = (cand < dist) & ~done
        dist[better] = cand[better]
        pred[better] = u
    return dist, pred


def min_cost_transport(cost, supply, demand, eps: float | None = None):
    """Optimal transport plan between ``supply`` (rows) and ``demand`` (columns).

    Returns ``(flow, total_cost, alpha, beta)`` where ``alpha_i + beta_j <= cost_ij``
    everywhere, with equality wherever ``flow_ij > 0``.
    """
    C = np.asarray(cost, dtype=float)
    a = np.asarray(supply, dtype=float).copy()
    b = np.asarray(demand, dtype=float).copy()
    m, n = C.shape
    if a.shape != (m,) or b.shape != (n,):
        raise ValidationError("supply/demand shapes do not match the cost matrix")
    if np.any(C < 0) or np.any(a < 0) or np.any(b < 0):
        raise ValidationError("costs, supplies and demands must be nonnegative")
    total = max(a.sum(), b.sum())
    if eps is None:
        eps = 1e-13 * max(total, 1e-300)
    if abs(a.sum() - b.sum()) > 1e-12 * max(1.0, total):
        raise ValidationError(f"unbalanced transport: supply {a.sum()} vs demand {b.sum()}")

    V = m + n + 2
    S, T = m + n, m + n + 1
    F = np.zeros((m, n))
    r = a.copy()  # remaining supply
    d = b.copy()  # remaining demand
    pi = np.zeros(V)
    iters = 0
    limit = 4 * (m * n + m + n) + 16
    while min(r.sum(), d.sum()) > eps:
        iters += 1
        if iters > limit:
            raise PropertyCheckError("transport solver failed to converge")
        w = np.full((V, V), np.inf)
        w[:m, m:m + n] = C
        back = F > eps
        w[m:m + n, :m] = np.where(back.T, -C.T, np.inf)
        w[S, :m] = np.where(r > eps, 0.0, np.inf)
        w[:m, S] = np.where(a - r > eps, 0.0, np.inf)
        w[m:m + n, T] = np.where(d > eps, 0.0, np.inf)
        w[T, m:m + n] = np.where(b - d > eps, 0.0, np.inf)
        red = w + pi[:, None] - pi[None, :]
        red = np.where(np.isfinite(w), np.maximum(red, 0.0), np.inf)
        dist, pred = _dijkstra(red, S)
        if not np.isfinite(dist[T]):
            raise PropertyCheckError("no augmenting path although supply remains")
        pi += np.minimum(dist, dist[T])
        # walk back from T, collecting the bottleneck
        path = []
        v = T
        while v != S:
            u = int(pred[v])
            path.append((u, v))
            v = u
        delta = np.inf
        for u, v in path:
            if u == S:
                delta = min(delta, r[v])
            elif v == T:
                delta = min(delta, d[u - m])
            elif u < m:
                pass  # forward edges are uncapacitated
            elif v == S or u == T:
                delta = min(delta, (a - r)[v] if v < m else (b - d)[v - m])
            else:
                delta = min(delta, F[v, u - m])
        for u, v in path:
            if u == S:
                r[v] -= delta
            elif v == T:
                d[u - m] -= delta
            elif u < m and m <= v < m + n:
                F[u, v - m] += delta
            elif m <= u < m + n and v < m:
                F[v, u - m] -= delta
            elif v == S:
                r[u] += delta
            elif u == T:
                d[v - m] += delta
        F[np.abs(F) <= eps] = 0.0
        r[r <= eps] = 0.0
        d[d <= eps] = 0.0
    alpha = -pi[:m]
    beta = pi[m:m + n]
    total_cost = math.fsum((F * C).ravel())
    return F, total_cost, alpha, beta
