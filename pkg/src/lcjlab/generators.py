"""Concrete spaces and curves: dyadic trees, Laakso stages, Cantor spaces,
antipodal sphere samples and the coordinate staircase."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, ValidationError
from .metric import MAX_DENSE_POINTS, FiniteMetricSpace, from_euclidean, from_weighted_graph
from .variation import StepCurve

MAX_TREE_DEPTH = 16
MAX_LAAKSO_LEVEL = 5
MAX_CANTOR_POINTS = 20000


# --- dyadic trees -----------------------------------------------------------

@dataclass(frozen=True)
class TreeSpec:
    depth: int

    @property
    def n_vertices(self) -> int:
        return 2 ** (self.depth + 1) - 1

    @staticmethod
    def index(level: int, pos: int) -> int:
        return 2 ** level - 1 + pos

    @staticmethod
    def label(level: int, pos: int) -> str:
        return f"{level}:{pos}"

    @property
    def leaves(self) -> list[int]:
        return [self.index(self.depth, p) for p in range(2 ** self.depth)]

    def ancestor(self, leaf_pos: int, level: int) -> int:
        """Index of the vertex at ``level`` on the root-to-leaf path of leaf ``leaf_pos``."""
        return self.index(level, leaf_pos >> (self.depth - level))

    def to_json(self) -> dict:
        return {"kind": "dyadic_tree", "depth": self.depth, "n_vertices": self.n_vertices,
                "leaves": [self.label(self.depth, p) for p in range(2 ** self.depth)]}


def _check_tree_depth(N: int) -> None:
    if not 1 <= N <= MAX_TREE_DEPTH:
        raise ValidationError(f"tree depth must be in 1..{MAX_TREE_DEPTH}, got {N}")


def dyadic_tree(N: int) -> tuple[FiniteMetricSpace, TreeSpec]:
    """Rooted binary tree of depth N with unit edges; vertex (level, pos) sits at
    index ``2**level - 1 + pos`` and is labelled ``"level:pos"``."""
    _check_tree_depth(N)
    spec = TreeSpec(N)
    if spec.n_vertices > MAX_DENSE_POINTS:
        raise CapExceededError(f"dyadic tree of depth {N} has {spec.n_vertices} vertices; "
                               f"dense metrics are capped at {MAX_DENSE_POINTS} points")
    labels = [spec.label(t, p) for t in range(N + 1) for p in range(2 ** t)]
    edges = [(spec.label(t, p), spec.label(t + 1, 2 * p + c), 1)
             for t in range(N) for p in range(2 ** t) for c in (0, 1)]
    return from_weighted_graph(labels, edges, 1.0), spec


def tree_leaves_ultrametric(N: int) -> FiniteMetricSpace:
    """Leaves of the depth-N dyadic tree with ``N - depth(LCA)``, half the induced graph metric."""
    _check_tree_depth(N)
    n = 2 ** N
    if n > MAX_DENSE_POINTS:
        raise CapExceededError(f"{n} leaves exceeds the dense-matrix cap; use tree_leaf_spectrum")
    pos = np.arange(n)
    x = pos[:, None] ^ pos[None, :]
    # bit_length of the xor = number of levels below the lowest common ancestor
    dist = np.zeros((n, n))
    nz = x > 0
    dist[nz] = np.floor(np.log2(x[nz])) + 1
    return FiniteMetricSpace(tuple(TreeSpec.label(N, p) for p in range(n)), dist)


def tree_leaf_spectrum(N: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Distinct leaf distances ``1..N`` of :func:`tree_leaves_ultrametric` with a leaf pair
    (by position) realizing each; usable when the dense matrix is out of reach."""
    _check_tree_depth(N)
    values = np.arange(1, N + 1, dtype=float)
    return values, [(0, 2 ** (k - 1)) for k in range(1, N + 1)]


# --- Laakso stages -----------------------------------------------------------

# children of a refined edge A-D: A-B, B-P, B-Q, P-C, Q-C, C-D
_CHILD_EDGES = (("A", "B"), ("B", "P"), ("B", "Q"), ("P", "C"), ("Q", "C"), ("C", "D"))


@dataclass(frozen=True)
class Refinement:
    """Replacement of the G_k edge A-D by a copy of G_1 in G_{k+1}.

    ``P`` is the upper and ``Q`` the lower midpoint; B and C are the quarter points.
    All points are indices into the stage space.
    """

    level: int
    code: str
    A: int
    B: int
    C: int
    D: int
    P: int
    Q: int


@dataclass(frozen=True)
class LaaksoStage:
    level: int
    scale: float
    edges: tuple[tuple[tuple[int, int, str], ...], ...]  # edges[k] = edges of G_k
    refinements: tuple[Refinement, ...]
    by_edge: dict = field(default_factory=dict, repr=False, compare=False)

    def refinement_of(self, a: int, d: int) -> Refinement:
        return self.by_edge[(a, d)]

    def to_json(self, labels) -> dict:
        return {
            "kind": "laakso_stage",
            "level": self.level,
            "scale": self.scale,
            "edges": [[[labels[a], labels[b], code] for a, b, code in lvl] for lvl in self.edges],
            "refinements": [
                {"level": r.level, "code": r.code,
                 **{k: labels[getattr(r, k)] for k in "ABCDPQ"}}
                for r in self.refinements
            ],
        }


def laakso_stage(N: int) -> tuple[FiniteMetricSpace, LaaksoStage]:
    """Vertex set X_N of the Laakso graph G_N with ``4**-N`` times the graph metric."""
    if not 1 <= N <= MAX_LAAKSO_LEVEL:
        raise ValidationError(f"Laakso level must be in 1..{MAX_LAAKSO_LEVEL}, got {N}")
    labels = ["0", "1"]
    index = {"0": 0, "1": 1}
    levels = [[(0, 1, "")]]
    raw_refinements = []
    for k in range(N):
        nxt = []
        for a, d, code in levels[k]:
            names = {"A": a, "D": d}
            for letter in "BPQC":
                lab = f"e{code}.{letter}"
                index[lab] = len(labels)
                labels.append(lab)
                names[letter] = index[lab]
            raw_refinements.append((k, code, names))
            for c, (u, v) in enumerate(_CHILD_EDGES):
                nxt.append((names[u], names[v], code + str(c)))
        levels.append(nxt)
    scale = 4.0 ** -N
    space = from_weighted_graph(labels, [(labels[a], labels[b], 1) for a, b, _ in levels[N]], scale)
    refinements = tuple(Refinement(k, code, **{x: nm[x] for x in "ABCDPQ"}) for k, code, nm in raw_refinements)
    by_edge = {(r.A, r.D): r for r in refinements}
    stage = LaaksoStage(N, scale, tuple(tuple(lv) for lv in levels), refinements, by_edge)
    return space, stage


def laakso_random_path(stage: LaaksoStage, rng: np.random.Generator, upto: int | None = None) -> list[int]:
    """Vertex sequence of a uniformly random left-to-right path in G_upto (default G_N)."""
    upto = stage.level if upto is None else upto
    path = [0, 1]
    for _ in range(upto):
        nxt = [path[0]]
        for a, d in zip(path, path[1:]):
            r = stage.refinement_of(a, d)
            mid = r.P if rng.random() < 0.5 else r.Q
            nxt.extend([r.B, mid, r.C, d])
        path = nxt
    return path


def laakso_paths(stage: LaaksoStage, upto: int | None = None):
    """Enumerate every left-to-right path of G_upto as a vertex list (small stages only)."""
    upto = stage.level if upto is None else upto
    paths = [[0, 1]]
    for _ in range(upto):
        expanded = []
        for path in paths:
            segs = [stage.refinement_of(a, d) for a, d in zip(path, path[1:])]
            for choice in itertools.product((0, 1), repeat=len(segs)):
                nxt = [path[0]]
                for r, c in zip(segs, choice):
                    nxt.extend([r.B, r.Q if c else r.P, r.C, r.D])
                expanded.append(nxt)
        paths = expanded
    return paths


# --- Cantor spaces -----------------------------------------------------------

@dataclass(frozen=True)
class CantorSpec:
    branching: int
    depth: int
    q: float
    words: tuple[str, ...]


def cantor_space(b: int, D: int, q: float, cap: int = MAX_CANTOR_POINTS) -> tuple[FiniteMetricSpace, CantorSpec]:
    """Words of length D over b letters with ``rho = q**LCP``."""
    if b < 2 or D < 1 or not 0 < q < 1:
        raise ValidationError("cantor_space needs b >= 2, D >= 1 and 0 < q < 1")
    n = b ** D
    if n > min(cap, MAX_DENSE_POINTS):
        raise CapExceededError(f"cantor_space({b}, {D}) has {n} points, above the cap")
    digits = np.array(list(itertools.product(range(b), repeat=D)), dtype=np.int64)
    lcp = np.zeros((n, n), dtype=np.int64)
    alive = np.ones((n, n), dtype=bool)
    for t in range(D):
        alive &= digits[:, None, t] == digits[None, :, t]
        lcp += alive
    powers = np.array([q ** k for k in range(D + 1)])
    dist = powers[lcp]
    np.fill_diagonal(dist, 0.0)
    sep = "" if b <= 10 else "."
    words = tuple(sep.join(str(c) for c in row) for row in digits)
    return FiniteMetricSpace(words, dist), CantorSpec(b, D, q, words)


# --- Euclidean families --------------------------------------------------------

def sphere_antipodal_sample(d: int, n: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """n independent uniform points on S^{d-1} (normalized Gaussians), each with its antipode."""
    if d < 2 or n < 1:
        raise ValidationError("need d >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    x = g / np.linalg.norm(g, axis=1, keepdims=True)
    return [(x[i], -x[i]) for i in range(n)]


def staircase_curve(d: int) -> tuple[FiniteMetricSpace, StepCurve]:
    """The jump sequence 0, e_1, e_1 + e_2, ..., e_1 + ... + e_d in R^d."""
    if d < 1:
        raise ValidationError("dimension must be at least 1")
    pts = np.tril(np.ones((d + 1, d)), -1)
    space = from_euclidean(pts, labels=[f"s{i}" for i in range(d + 1)])
    return space, StepCurve(tuple(range(d + 1)))
