"""Finite metric spaces and Lipschitz function utilities.

A :class:`FiniteMetricSpace` is a tuple of labels plus a dense distance
matrix.  Construction performs the cheap checks (shape, diagonal,
symmetry, positivity); the cubic triangle-inequality scan lives in
:func:`validate_metric` and is run explicitly by readers and tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import CapExceededError, ValidationError

TAU_METRIC = 1e-9

# Dense matrices above this many points would not fit the desk-scale memory budget.
MAX_DENSE_POINTS = 8192


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    labels: tuple[str, ...]
    dist: np.ndarray
    coords: np.ndarray | None = None
    graph: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        dist = np.array(self.dist, dtype=float)
        n = len(labels)
        if dist.ndim != 2 or dist.shape != (n, n):
            raise ValidationError(f"distance matrix has shape {dist.shape}, expected ({n}, {n})")
        if n == 0:
            raise ValidationError("a metric space needs at least one point")
        if len(set(labels)) != n:
            raise ValidationError("point labels must be unique")
        if not np.all(np.isfinite(dist)):
            raise ValidationError("distance matrix has non-finite entries")
        if np.any(np.diag(dist) != 0):
            i = int(np.flatnonzero(np.diag(dist))[0])
            raise ValidationError(f"nonzero diagonal at {labels[i]!r}")
        if not np.array_equal(dist, dist.T):
            i, j = np.argwhere(dist != dist.T)[0]
            raise ValidationError(f"asymmetric distances between {labels[i]!r} and {labels[j]!r}")
        off = ~np.eye(n, dtype=bool)
        if np.any(dist[off] <= 0):
            i, j = np.argwhere((dist <= 0) & off)[0]
            raise ValidationError(
                f"points {labels[i]!r} and {labels[j]!r} are at distance {dist[i, j]}; duplicates are rejected"
            )
        dist.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", dist)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            if coords.ndim != 2 or coords.shape[0] != n:
                raise ValidationError("coordinates must be an (n, d) array")
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def index(self, label) -> int:
        try:
            return self._index_map()[str(label)]
        except KeyError:
            raise ValidationError(f"unknown point label {label!r}") from None

    def _index_map(self) -> dict[str, int]:
        cache = self.__dict__.get("_idx")
        if cache is None:
            cache = {lab: i for i, lab in enumerate(self.labels)}
            object.__setattr__(self, "_idx", cache)
        return cache

    def indices(self, points: Iterable) -> list[int]:
        """Resolve a mix of integer indices and labels to indices."""
        out = []
        for p in points:
            if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
                if not 0 <= p < self.n:
                    raise ValidationError(f"point index {p} out of range")
                out.append(int(p))
            else:
                out.append(self.index(p))
        return out


@dataclass(frozen=True, eq=False)
class LipschitzFunction:
    """Tabulated real function with a certified Lipschitz bound."""

    values: np.ndarray
    certified_L: float

    def __call__(self, i: int) -> float:
        return float(self.values[i])


@dataclass
class MetricValidationReport:
    violations: list[tuple[int, int, int, float]] = field(default_factory=list)
    symmetry_errors: list[tuple[int, int, str, float]] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations and not self.symmetry_errors


def _as_square(matrix) -> np.ndarray:
    d = np.asarray(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValidationError("matrix has non-finite entries")
    return d


def validate_metric(matrix, tau: float = TAU_METRIC) -> MetricValidationReport:
    """Report every diagonal, symmetry, positivity and triangle violation beyond ``tau``.

    A triangle violation ``(i, k, j, slack)`` means ``d[i,k] > d[i,j] + d[j,k] + tau``
    with ``slack = d[i,k] - d[i,j] - d[j,k]``; only ``i < k`` is listed.
    """
    if isinstance(matrix, FiniteMetricSpace):
        matrix = matrix.dist
    d = _as_square(matrix)
    n = d.shape[0]
    report = MetricValidationReport()
    for i in range(n):
        if abs(d[i, i]) > tau:
            report.symmetry_errors.append((i, i, "diagonal", float(d[i, i])))
    for i, j in zip(*np.nonzero(np.triu(np.abs(d - d.T) > tau, 1))):
        report.symmetry_errors.append((int(i), int(j), "asymmetric", float(d[i, j] - d[j, i])))
    for i, j in zip(*np.nonzero(np.triu(d <= 0, 1) | np.tril(d <= 0, -1))):
        report.symmetry_errors.append((int(i), int(j), "nonpositive", float(d[i, j])))
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    for j in range(n):
        slack = d - (d[:, j, None] + d[None, j, :])
        bad = (slack > tau) & upper
        if bad.any():
            for i, k in zip(*np.nonzero(bad)):
                report.violations.append((int(i), int(k), j, float(slack[i, k])))
    report.violations.sort()
    return report


def from_weighted_graph(vertices: Sequence[Hashable], edges: Iterable[tuple], scale: float = 1.0,
                        keep_edges: bool = True) -> FiniteMetricSpace:
    """Shortest-path metric of a connected graph with positive edge weights, times ``scale``."""
    labels = [str(v) for v in vertices]
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate vertex labels")
    if not scale > 0:
        raise ValidationError("scale must be positive")
    n = len(labels)
    if n > MAX_DENSE_POINTS:
        raise CapExceededError(f"{n} vertices exceeds the dense-matrix cap {MAX_DENSE_POINTS}")
    pos = {lab: i for i, lab in enumerate(labels)}
    best: dict[tuple[int, int], float] = {}
    edge_list = []
    for u, v, w in edges:
        try:
            a, b = pos[str(u)], pos[str(v)]
        except KeyError as exc:
            raise ValidationError(f"edge references unknown vertex {exc.args[0]!r}") from None
        w = float(w)
        if not (w > 0 and np.isfinite(w)):
            raise ValidationError(f"edge ({u}, {v}) has non-positive weight {w}")
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        best[key] = min(w, best.get(key, np.inf))
        if keep_edges:
            edge_list.append([labels[a], labels[b], w])
    if best:
        rows, cols = zip(*best.keys())
        g = coo_matrix((list(best.values()), (rows, cols)), shape=(n, n)).tocsr()
    else:
        g = coo_matrix((n, n)).tocsr()
    hops = shortest_path(g, method="D", directed=False)
    if np.isinf(hops).any():
        i, j = np.argwhere(np.isinf(hops))[0]
        raise ValidationError(f"graph is disconnected: no path between {labels[i]!r} and {labels[j]!r}")
    provenance = {"edges": edge_list, "scale": scale} if keep_edges else None
    return FiniteMetricSpace(tuple(labels), hops * scale, graph=provenance)


def from_euclidean(points, labels: Sequence[str] | None = None) -> FiniteMetricSpace:
    """Point cloud in R^d with the Euclidean norm; coordinates are kept on the space."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValidationError("points must be a list of equal-length vectors")
    n = pts.shape[0]
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    dist = np.triu(dist, 1)
    dist = dist + dist.T
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0):
        i, j = np.argwhere((dist == 0) & off)[0]
        raise ValidationError(f"duplicate points at indices {i} and {j}")
    if labels is None:
        labels = [f"p{i}" for i in range(n)]
    return FiniteMetricSpace(tuple(labels), dist, coords=pts)


def lipschitz_constant(space: FiniteMetricSpace, values) -> tuple[float, tuple[int, int]]:
    """Exact Lipschitz constant over all pairs, with a pair attaining it."""
    f = np.asarray(values, dtype=float)
    if f.shape != (space.n,):
        raise ValidationError(f"expected {space.n} values, got shape {f.shape}")
    if space.n < 2:
        raise ValidationError("Lipschitz constant needs at least two points")
    iu, ju = np.triu_indices(space.n, 1)
    slopes = np.abs(f[iu] - f[ju]) / space.dist[iu, ju]
    k = int(np.argmax(slopes))
    return float(slopes[k]), (int(iu[k]), int(ju[k]))


def certify(space: FiniteMetricSpace, values) -> LipschitzFunction:
    f = np.array(values, dtype=float)
    L = lipschitz_constant(space, f)[0] if space.n > 1 else 0.0
    f.setflags(write=False)
    return LipschitzFunction(f, L)


def inf_convolution(space: FiniteMetricSpace, anchors: Sequence[int], g, L: float = 1.0) -> np.ndarray:
    """``x -> min_p (g(p) + L * dist(x, p))`` over the anchor points p."""
    idx = np.asarray(anchors, dtype=int)
    g = np.asarray(g, dtype=float)
    return (g[None, :] + L * space.dist[:, idx]).min(axis=1)


def mcshane_extend(space: FiniteMetricSpace, anchors: Mapping | Sequence, L: float,
                   values=None, tol: float = 1e-12) -> LipschitzFunction:
    """McShane extension of an L-Lipschitz function given on a subset.

    ``anchors`` is either a mapping point -> value, or a sequence of points
    with the values passed separately.
    """
    if isinstance(anchors, Mapping):
        pts, g = list(anchors.keys()), list(anchors.values())
    else:
        pts, g = list(anchors), list(values)
    if not pts or len(pts) != len(g):
        raise ValidationError("need at least one anchor and one value per anchor")
    if L < 0:
        raise ValidationError("Lipschitz bound must be nonnegative")
    idx = space.indices(pts)
    g = np.asarray(g, dtype=float)
    for a, b in itertools.combinations(range(len(idx)), 2):
        gap = abs(g[a] - g[b]) - L * space.dist[idx[a], idx[b]]
        if gap > tol * max(1.0, abs(g[a]), abs(g[b])):
            raise ValidationError(
                f"anchor values violate the {L}-Lipschitz bound on pair "
                f"({space.labels[idx[a]]!r}, {space.labels[idx[b]]!r}) by {gap:.3g}"
            )
    f = inf_convolution(space, idx, g, L)
    return certify(space, f)


def restrict(space: FiniteMetricSpace, subset: Iterable) -> FiniteMetricSpace:
    idx = space.indices(subset)
    if not idx:
        raise ValidationError("cannot restrict to an empty subset")
    if len(set(idx)) != len(idx):
        raise ValidationError("subset contains repeated points")
    ix = np.asarray(idx)
    coords = space.coords[ix] if space.coords is not None else None
    return FiniteMetricSpace(tuple(space.labels[i] for i in idx), space.dist[np.ix_(ix, ix)], coords=coords)


def is_ultrametric(space: FiniteMetricSpace, tau: float = 0.0) -> tuple[bool, tuple[int, int, int] | None]:
    """Check ``d(i,k) <= max(d(i,j), d(j,k)) + tau``; the witness is the lexicographically
    smallest violating ``(i, k, j)`` with ``i < k``."""
    d = space.dist
    n = space.n
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    best = None
    for j in range(n):
        bad = (d > np.maximum(d[:, j, None], d[None, j, :]) + tau) & upper
        if bad.any():
            i, k = np.argwhere(bad)[0]
            cand = (int(i), int(k), j)
            if best is None or cand < best:
                best = cand
    return best is None, best


def _greedy_cover(ball: np.ndarray, d: np.ndarray, radius: float) -> int:
    covers = d[:, ball] <= radius  # candidate centre x ball point
    uncovered = np.ones(ball.size, dtype=bool)
    count = 0
    while uncovered.any():
        gain = (covers & uncovered).sum(axis=1)
        z = int(np.argmax(gain))
        uncovered &= ~covers[z]
        count += 1
    return count


def estimate_doubling(space: FiniteMetricSpace) -> int:
    """Greedy upper estimate of ``sup_{x,r} N_r(x)``, the number of r/2-balls
    needed to cover B_r(x).  Diagnostic only: greedy set cover is not tight in general."""
    d = space.dist
    if space.n == 1:
        return 1
    radii = np.unique(d[d > 0])
    worst = 1
    for x in range(space.n):
        for r in radii:
            ball = np.flatnonzero(d[x] <= r)
            worst = max(worst, _greedy_cover(ball, d, r / 2))
    return worst


def distance_to_set(space: FiniteMetricSpace, subset: Iterable) -> np.ndarray:
    idx = space.indices(subset)
    if not idx:
        raise ValidationError("distance to an empty set is undefined")
    return space.dist[:, idx].min(axis=1)


def random_lipschitz(space: FiniteMetricSpace, rng: np.random.Generator, L: float = 1.0) -> LipschitzFunction:
    """A random L-Lipschitz function: uniform random values repaired by inf-convolution.

    The repair ``min_p (g(p) + L d(x, p))`` is L-Lipschitz for any ``g``; drawing
    ``g`` on a random subset of anchors gives a wide spread of shapes.
    """
    n = space.n
    span = L * space.diameter if n > 1 else 1.0
    k = int(rng.integers(1, n + 1))
    anchors = rng.choice(n, size=k, replace=False)
    g = rng.uniform(0.0, span, size=k)
    return certify(space, inf_convolution(space, anchors, g, L))
