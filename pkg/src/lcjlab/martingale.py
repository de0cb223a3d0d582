"""Finite filtrations, martingales built from Lipschitz functions, and the
paired-atom certificates on dyadic trees and Laakso stages.

Atom probabilities are exact :class:`~fractions.Fraction` values; martingale
values are floats.  Level ``n`` of a filtration is a list of atoms, each with
a parent index into level ``n - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapExceededError, PropertyCheckError, ValidationError
from .generators import LaaksoStage, TreeSpec, dyadic_tree, laakso_paths, laakso_stage
from .metric import FiniteMetricSpace, LipschitzFunction
from .variation import PairMeasure

MARTINGALE_TOL = 1e-10


@dataclass
class Filtration:
    ids: list[list]
    probs: list[list[Fraction]]
    parents: list[np.ndarray | None]
    equal_levels: bool = True

    def __post_init__(self):
        self._pf = [np.array([float(p) for p in lvl]) for lvl in self.probs]
        self.validate()

    @property
    def depth(self) -> int:
        """Number of increments, i.e. levels minus one."""
        return len(self.ids) - 1

    def prob(self, n: int) -> np.ndarray:
        return self._pf[n]

    def validate(self) -> None:
        if len(self.ids) != len(self.probs) or len(self.ids) != len(self.parents):
            raise ValidationError("filtration levels are inconsistent")
        for n, lvl in enumerate(self.probs):
            if sum(lvl, Fraction(0)) != 1:
                raise ValidationError(f"level {n} probabilities sum to {sum(lvl, Fraction(0))}")
            if self.equal_levels and len(set(lvl)) > 1:
                raise ValidationError(f"level {n} atoms do not have equal probability")
            if n == 0:
                continue
            par = self.parents[n]
            if par is None or len(par) != len(lvl):
                raise ValidationError(f"level {n} is missing parent links")
            acc = [Fraction(0)] * len(self.probs[n - 1])
            for p, i in zip(lvl, par):
                acc[int(i)] += p
            for i, (got, want) in enumerate(zip(acc, self.probs[n - 1])):
                if got != want:
                    raise ValidationError(f"children of atom {self.ids[n - 1][i]!r} carry {got}, parent {want}")

    def lift(self, arr: np.ndarray, n: int, to: int | None = None) -> np.ndarray:
        """Extend a level-n function to the atoms of a finer level."""
        to = self.depth if to is None else to
        for m in range(n + 1, to + 1):
            arr = arr[self.parents[m]]
        return arr


@dataclass
class MartingaleSeq:
    filtration: Filtration
    values: list[np.ndarray]

    def __post_init__(self):
        if len(self.values) != len(self.filtration.ids):
            raise ValidationError("one value array per filtration level is required")
        self.values = [np.asarray(v, dtype=float) for v in self.values]

    def diff(self, n: int) -> np.ndarray:
        """dM_n on the atoms of level n (n >= 1)."""
        return self.values[n] - self.values[n - 1][self.filtration.parents[n]]

    def sup_norm(self) -> float:
        return max(float(np.abs(v).max()) for v in self.values)

    def expectation(self, arr: np.ndarray, n: int) -> float:
        return math.fsum(self.filtration.prob(n) * arr)

    def conditional_errors(self):
        """Per level, ``E(M_{n+1} | F_n) - M_n`` on the atoms of level n."""
        out = []
        F = self.filtration
        for n in range(F.depth):
            par = F.parents[n + 1]
            mass = np.bincount(par, weights=F.prob(n + 1) * self.values[n + 1], minlength=len(F.ids[n]))
            out.append(mass / F.prob(n) - self.values[n])
        return out

    def check(self, tol: float = MARTINGALE_TOL) -> float:
        worst = 0.0
        for n, err in enumerate(self.conditional_errors()):
            i = int(np.argmax(np.abs(err)))
            if abs(err[i]) > tol:
                raise PropertyCheckError(
                    f"not a martingale: atom {self.filtration.ids[n][i]!r} at level {n} is off by {err[i]:.3g}")
            worst = max(worst, abs(float(err[i])))
        return worst

    def increment_mass(self, n: int) -> np.ndarray:
        """``E |dM_{n+1}| chi_omega`` for every atom omega of level n."""
        F = self.filtration
        par = F.parents[n + 1]
        return np.bincount(par, weights=F.prob(n + 1) * np.abs(self.diff(n + 1)), minlength=len(F.ids[n]))


@dataclass
class OrthogonalityReport:
    max_abs: float
    worst_pair: tuple[int, int] | None
    passed: bool


def check_orthogonality(M: MartingaleSeq, tol: float = MARTINGALE_TOL) -> OrthogonalityReport:
    """Largest ``|E dM_n dM_m|`` over ``n != m``; differences are lifted to the finest level."""
    M.check(tol)
    F = M.filtration
    top = F.depth
    p = F.prob(top)
    lifted = [F.lift(M.diff(n), n) for n in range(1, top + 1)]
    worst, pair = 0.0, None
    for a in range(len(lifted)):
        for b in range(a + 1, len(lifted)):
            v = abs(math.fsum(p * lifted[a] * lifted[b]))
            if pair is None or v > worst:
                worst, pair = v, (a + 1, b + 1)
    return OrthogonalityReport(worst, pair, worst <= tol)


def sqrtN_inequality_check(M: MartingaleSeq, tol: float = MARTINGALE_TOL) -> tuple[float, float, bool]:
    """``sum_{n=1}^N E|dM_n|`` against ``sqrt(N) * max |M|``."""
    N = M.filtration.depth
    lhs = math.fsum(M.expectation(np.abs(M.diff(n)), n) for n in range(1, N + 1))
    rhs = math.sqrt(N) * M.sup_norm()
    return lhs, rhs, lhs <= rhs + tol


# --- dyadic martingale on [0, 1] --------------------------------------------------

def dyadic_filtration(N: int) -> Filtration:
    ids = [[(n, k) for k in range(1, 2 ** n + 1)] for n in range(N + 1)]
    probs = [[Fraction(1, 2 ** n)] * 2 ** n for n in range(N + 1)]
    parents = [None] + [np.arange(2 ** n) // 2 for n in range(1, N + 1)]
    return Filtration(ids, probs, parents)


def dyadic_martingale(f, N: int) -> MartingaleSeq:
    """Slopes of ``f`` on the dyadic intervals of generation n, for ``f`` given on ``k 2**-N``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (2 ** N + 1,):
        raise ValidationError(f"expected {2 ** N + 1} grid values for N={N}, got {f.shape}")
    values = []
    for n in range(N + 1):
        step = 2 ** (N - n)
        values.append(2.0 ** n * (f[step::step] - f[:-step:step]))
    return MartingaleSeq(dyadic_filtration(N), values)


def random_grid_lipschitz(N: int, rng: np.random.Generator, L: float = 1.0) -> np.ndarray:
    """Random L-Lipschitz values on ``{k 2**-N}`` with dyadic steps, so arithmetic stays exact."""
    steps = rng.integers(-8, 9, size=2 ** N) / 8.0 * L * 2.0 ** -N
    start = rng.integers(-8, 9) / 8.0
    return np.concatenate([[start], start + np.cumsum(steps)])


# --- paired atoms --------------------------------------------------------------

@dataclass
class PairGroup:
    """Atoms of one level sharing a pairing key; any left atom may pair with any right one."""

    level: int
    key: int
    left: list[int]
    right: list[int]


@dataclass
class PairedAtoms:
    groups: list[PairGroup]
    c: Fraction

    def canonical_pairs(self):
        for g in self.groups:
            yield from ((g.level, a, b) for a, b in zip(g.left, g.right))


def _skip_mask(fa, fb, f):
    return np.abs(fa - fb) <= 1e-12 * (1.0 + float(np.abs(f).max()))


# --- dyadic tree instance -----------------------------------------------------

@dataclass
class TreeInstance:
    N: int
    space: FiniteMetricSpace
    spec: TreeSpec
    filtration: Filtration
    v: list[np.ndarray]  # upper vertex of each atom, per level
    vp: list[np.ndarray]  # lower vertex (x_omega), per level
    paired: PairedAtoms
    measure: PairMeasure
    exact_weights: list[Fraction]
    mass: Fraction
    kappa: int = 1

    @property
    def levels(self) -> int:
        """Level count L in the mass identity ``sum w rho = (L - 1) / 2``."""
        return self.filtration.depth + 1

    def metadata(self) -> dict:
        return {
            "kind": "tree", "N": self.N, "tree_depth": self.spec.depth, "levels": self.levels,
            "c": str(self.paired.c), "mass": str(self.mass), "kappa": self.kappa,
            "atoms_per_level": [len(x) for x in self.filtration.ids],
            "pair_groups": len(self.paired.groups), "measure_atoms": len(self.measure),
        }


MAX_TREE_INSTANCE = 3


def tree_instance(N: int) -> TreeInstance:
    """Adversarial pair measure on the dyadic tree of depth ``2**N``.

    Atoms ``(k, j, l)``: leaf j, segment l of 2**k equal segments of the root-to-leaf
    path, probability ``2**(-2**N - k)``.  Atoms sharing the segment midpoint U are
    paired left/right; the measure spreads weight ``c`` per pair uniformly over all
    left/right combinations.
    """
    if not 1 <= N <= MAX_TREE_INSTANCE:
        raise CapExceededError(f"tree_instance supports N in 1..{MAX_TREE_INSTANCE}")
    D = 2 ** N
    space, spec = dyadic_tree(D)
    n_leaves = 2 ** D
    ids, probs, parents, v, vp = [], [], [], [], []
    for k in range(N + 1):
        seg = 2 ** (N - k)
        j = np.repeat(np.arange(n_leaves), 2 ** k)
        ell = np.tile(np.arange(1, 2 ** k + 1), n_leaves)
        ids.append([(k, int(a) + 1, int(b)) for a, b in zip(j, ell)])
        probs.append([Fraction(1, 2 ** (D + k))] * (n_leaves * 2 ** k))
        parents.append(None if k == 0 else (np.arange(n_leaves * 2 ** k) // 2))
        v.append(np.array([spec.ancestor(a, (b - 1) * seg) for a, b in zip(j, ell)]))
        vp.append(np.array([spec.ancestor(a, b * seg) for a, b in zip(j, ell)]))
    filt = Filtration(ids, probs, parents)
    c = Fraction(1, 2 ** (D + N))

    groups = []
    atoms, weights = [], []
    for k in range(N):
        half = 2 ** (N - k - 1)
        by_u: dict[int, PairGroup] = {}
        for i, (kk, jj, ell) in enumerate(ids[k]):
            depth_u = (2 * ell - 1) * half
            u = spec.ancestor(jj - 1, depth_u)
            g = by_u.setdefault(u, PairGroup(k, u, [], []))
            # direction taken below U on the way to leaf j
            turn = ((jj - 1) >> (D - depth_u - 1)) & 1
            (g.right if turn else g.left).append(i)
        for u in sorted(by_u):
            g = by_u[u]
            if len(g.left) != len(g.right):
                raise PropertyCheckError(f"unbalanced pairing at vertex {space.labels[u]}")
            groups.append(g)
            lefts = sorted({int(vp[k][i]) for i in g.left})
            rights = sorted({int(vp[k][i]) for i in g.right})
            w = c * len(g.left) / (len(lefts) * len(rights))
            for a in lefts:
                for b in rights:
                    atoms.append((a, b, float(w)))
                    weights.append(w)
    measure = PairMeasure(tuple(atoms))
    mass = sum((w * Fraction(space.dist[a, b]) for (a, b, _), w in zip(atoms, weights)), Fraction(0))
    return TreeInstance(N, space, spec, filt, v, vp, PairedAtoms(groups, c), measure, weights, mass)


def tree_martingale(inst: TreeInstance, f) -> MartingaleSeq:
    """``M_k = 2**(k - N) (f(v) - f(v'))`` on atom (k, j, l): the slope of f along the path segment."""
    f = np.asarray(f.values if isinstance(f, LipschitzFunction) else f, dtype=float)
    if f.shape != (inst.space.n,):
        raise ValidationError("f must be tabulated on every tree vertex")
    vals = [2.0 ** (k - inst.N) * (f[inst.v[k]] - f[inst.vp[k]]) for k in range(inst.N + 1)]
    return MartingaleSeq(inst.filtration, vals)


# --- Laakso instance ---------------------------------------------------------------

# traversal probability of each child edge relative to its parent (A-B, B-P, B-Q, P-C, Q-C, C-D)
_CHILD_SHARE = (Fraction(1), Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), Fraction(1))


@dataclass
class LaaksoInstance:
    N: int
    space: FiniteMetricSpace
    stage: LaaksoStage
    edge_prob: list[dict]  # per level k: {(a, d): traversal probability}
    refinements: list  # aligned with measure atoms
    measure: PairMeasure
    exact_weights: list[Fraction]
    path_count: int
    mass: Fraction
    kappa: int = 4

    @property
    def levels(self) -> int:
        return self.N + 1

    @property
    def c(self) -> Fraction:
        return Fraction(2, self.path_count)

    def metadata(self) -> dict:
        return {
            "kind": "laakso", "N": self.N, "levels": self.levels, "path_count_log2": self.path_count.bit_length() - 1,
            "c": f"2/M with M = 2^{self.path_count.bit_length() - 1}", "mass": str(self.mass), "kappa": self.kappa,
            "edges_per_level": [len(e) for e in self.stage.edges], "measure_atoms": len(self.measure),
        }


MAX_LAAKSO_INSTANCE = 4


def laakso_instance(N: int) -> LaaksoInstance:
    """Adversarial pair measure on X_N: one atom ``(P_l, Q_l)`` per refined edge l, weighted by
    the probability that a uniformly random left-to-right path traverses l."""
    if not 1 <= N <= MAX_LAAKSO_INSTANCE:
        raise CapExceededError(f"laakso_instance supports N in 1..{MAX_LAAKSO_INSTANCE}")
    space, stage = laakso_stage(N)
    edge_prob = [{(0, 1): Fraction(1)}]
    for k in range(N):
        nxt = {}
        for a, d, _ in stage.edges[k]:
            r = stage.refinement_of(a, d)
            p = edge_prob[k][(a, d)]
            ends = ((r.A, r.B), (r.B, r.P), (r.B, r.Q), (r.P, r.C), (r.Q, r.C), (r.C, r.D))
            for e, share in zip(ends, _CHILD_SHARE):
                nxt[e] = p * share
        edge_prob.append(nxt)
    refs, atoms, weights = [], [], []
    for r in stage.refinements:
        w = edge_prob[r.level][(r.A, r.D)]
        refs.append(r)
        atoms.append((r.P, r.Q, float(w)))
        weights.append(w)
    measure = PairMeasure(tuple(atoms))
    mass = sum((w * Fraction(space.dist[r.P, r.Q]) for r, w in zip(refs, weights)), Fraction(0))
    M = 1
    for k in range(N):
        M *= 2 ** (4 ** k)
    return LaaksoInstance(N, space, stage, edge_prob, refs, measure, weights, M, mass)


def laakso_edge_martingale(inst: LaaksoInstance, f) -> MartingaleSeq:
    """Slope martingale on the edge quotient of the path filtration.

    Level-k atoms are the edges of G_k with probability ``pi_e 4**-k``; ``M_k`` is the
    slope ``4**k (f(D) - f(A))`` of the traversed edge.  Increments coincide pointwise
    with those on the full path filtration, so every expectation agrees.
    """
    f = np.asarray(f.values if isinstance(f, LipschitzFunction) else f, dtype=float)
    st = inst.stage
    ids, probs, parents, vals = [], [], [], []
    pos_prev = None
    for k in range(inst.N + 1):
        edges = st.edges[k]
        ids.append([(k, code) for _, _, code in edges])
        probs.append([inst.edge_prob[k][(a, d)] / 4 ** k for a, d, _ in edges])
        vals.append(np.array([4.0 ** k * (f[d] - f[a]) for a, d, _ in edges]))
        if k == 0:
            parents.append(None)
        else:
            parents.append(np.array([pos_prev[code[:-1]] for _, _, code in edges]))
        pos_prev = {code: i for i, (_, _, code) in enumerate(edges)}
    return MartingaleSeq(Filtration(ids, probs, parents, equal_levels=False), vals)


def laakso_path_filtration(inst: LaaksoInstance):
    """Fully materialized path filtration (N <= 2): atom (s, j) is segment j of path s in G_k.

    Returns the filtration and, per level, the edge ``(a, d)`` each atom sits on.
    """
    if inst.N > 2:
        raise CapExceededError("materialized path filtrations are limited to N <= 2")
    paths = laakso_paths(inst.stage)
    M = len(paths)
    st = inst.stage
    ids, probs, parents, edges = [], [], [], []
    for k in range(inst.N + 1):
        stride = 4 ** (inst.N - k)
        lvl_ids, lvl_edges = [], []
        for s, path in enumerate(paths):
            pts = path[::stride]
            for j in range(4 ** k):
                lvl_ids.append((k, s, j))
                lvl_edges.append((pts[j], pts[j + 1]))
        ids.append(lvl_ids)
        edges.append(lvl_edges)
        probs.append([Fraction(1, M * 4 ** k)] * len(lvl_ids))
        parents.append(None if k == 0 else np.array([s * 4 ** (k - 1) + j // 4 for (_, s, j) in lvl_ids]))
    return Filtration(ids, probs, parents), edges


def laakso_path_martingale(inst: LaaksoInstance, f):
    filt, edges = laakso_path_filtration(inst)
    f = np.asarray(f, dtype=float)
    vals = [np.array([4.0 ** k * (f[d] - f[a]) for a, d in edges[k]]) for k in range(inst.N + 1)]
    return MartingaleSeq(filt, vals), edges


# --- certificates --------------------------------------------------------------------

def _tree_condition(inst: TreeInstance, f: np.ndarray, M: MartingaleSeq) -> float:
    c = float(inst.paired.c)
    worst = math.inf
    for g in inst.paired.groups:
        mass = M.increment_mass(g.level)
        vp = inst.vp[g.level]
        # one representative atom per distinct lower vertex: the increment only depends on it
        lrep = {int(vp[i]): i for i in g.left}
        rrep = {int(vp[i]): i for i in g.right}
        lv, li = np.array(list(lrep)), np.array(list(lrep.values()))
        rv, ri = np.array(list(rrep)), np.array(list(rrep.values()))
        num = mass[li][:, None] + mass[ri][None, :]
        fa, fb = f[lv][:, None], f[rv][None, :]
        skip = _skip_mask(fa, fb, f)
        if np.all(skip):
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / (c * np.abs(fa - fb))
        worst = min(worst, float(ratio[~skip].min()))
    return worst


def _laakso_condition(inst: LaaksoInstance, f: np.ndarray) -> float:
    # per-pair expectation with the path count scaled out: P(omega) = 4**-k, c = 2
    worst = math.inf
    for r in inst.refinements:
        k = r.level
        A, B, C, D, P, Q = (f[getattr(r, x)] for x in "ABCDPQ")
        if abs(P - Q) <= 1e-12 * (1.0 + float(np.abs(f).max())):
            continue
        s = 4.0 ** k * (D - A)
        outer = abs(4.0 ** (k + 1) * (B - A) - s) + abs(4.0 ** (k + 1) * (D - C) - s)
        route = lambda X: abs(4.0 ** (k + 1) * (X - B) - s) + abs(4.0 ** (k + 1) * (C - X) - s)
        mass = 4.0 ** -k / 4 * (2 * outer + route(P) + route(Q))
        worst = min(worst, mass / (2 * abs(P - Q)))
    return worst


def condition42_check(inst, f) -> float:
    """Smallest realized constant in ``E|dM_{n+1}| chi_{w1 u w2} >= const * c |f(x_w1) - f(x_w2)|``
    over all admissible pairs; ``inf`` when every pair has equal values (vacuous)."""
    vals = np.asarray(f.values if isinstance(f, LipschitzFunction) else f, dtype=float)
    if isinstance(f, LipschitzFunction) and f.certified_L > 1 + 1e-9:
        raise ValidationError(f"f is only certified {f.certified_L}-Lipschitz")
    if isinstance(inst, TreeInstance):
        return _tree_condition(inst, vals, tree_martingale(inst, vals))
    if isinstance(inst, LaaksoInstance):
        return _laakso_condition(inst, vals)
    raise ValidationError("condition42_check needs a tree or Laakso instance")


@dataclass
class ChainReport:
    score: float  # sum_mu w |f(x) - f(y)|
    increments: float  # sum_n E|dM_{n+1}| over the paired levels
    sup_norm: float
    mass: float
    levels: int
    kappa: int
    min_constant: float

    @property
    def ratio(self) -> float:
        return self.score / self.mass

    @property
    def certified_ratio(self) -> float:
        """``kappa sqrt(L) / ((L - 1) / 2)``: the upper bound the chain certifies for every f."""
        return self.kappa * math.sqrt(self.levels) / ((self.levels - 1) / 2)

    def holds(self, tol: float = 1e-9) -> bool:
        n_inc = self.levels - 1
        return (self.score <= self.kappa * self.increments * (1 + tol) + tol
                and self.increments <= math.sqrt(n_inc) * self.sup_norm * (1 + tol) + tol
                and self.ratio <= self.certified_ratio * (1 + tol))


def proposition_chain(inst, f) -> ChainReport:
    """Evaluate every link of ``sum c|df| <= kappa sum E|dM| <= kappa sqrt(L) ||M||`` for one f."""
    vals = np.asarray(f.values if isinstance(f, LipschitzFunction) else f, dtype=float)
    if isinstance(inst, TreeInstance):
        M = tree_martingale(inst, vals)
    elif isinstance(inst, LaaksoInstance):
        M = laakso_edge_martingale(inst, vals)
    else:
        raise ValidationError("proposition_chain needs a tree or Laakso instance")
    M.check()
    n_inc = M.filtration.depth
    inc = math.fsum(M.expectation(np.abs(M.diff(n)), n) for n in range(1, n_inc + 1))
    score = math.fsum(w * abs(vals[x] - vals[y]) for x, y, w in inst.measure.atoms)
    return ChainReport(score, inc, M.sup_norm(), float(inst.mass), inst.levels, inst.kappa,
                       condition42_check(inst, vals))


# --- six-point inequality ------------------------------------------------------------

def sixpoint_lhs(A, B, C, D, P, Q):
    return (2 * np.abs(D + 3 * A - 4 * B) + 2 * np.abs(A + 3 * D - 4 * C)
            + np.abs(D - A + 4 * B - 4 * P) + np.abs(D - A - 4 * C + 4 * P)
            + np.abs(D - A + 4 * B - 4 * Q) + np.abs(D - A - 4 * C + 4 * Q))


def sixpoint_inequality_check(samples: int, seed: int, chunk: int = 200_000) -> tuple[float, bool]:
    """Randomized falsification of ``lhs(A..Q) >= |f(P) - f(Q)|``.

    Half of each chunk is i.i.d. Gaussian, half sits near the tight configuration
    (f affine along A, B, C, D with P, Q straddling the midpoint).
    """
    rng = np.random.default_rng(seed)
    worst = math.inf
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        X = rng.standard_normal((m, 6))
        h = m // 2
        a, slope = rng.standard_normal(h), rng.standard_normal(h)
        t = rng.standard_normal(h) * 10.0 ** rng.uniform(-6, 0, h)
        X[:h, 0], X[:h, 1], X[:h, 2], X[:h, 3] = a, a + slope, a + 3 * slope, a + 4 * slope
        X[:h, 4] = a + 2 * slope + t
        X[:h, 5] = a + 2 * slope - t + rng.standard_normal(h) * 1e-3 * np.abs(t)
        lhs = sixpoint_lhs(*X.T)
        gap = np.abs(X[:, 4] - X[:, 5])
        keep = gap > 0
        if keep.any():
            worst = min(worst, float((lhs[keep] / gap[keep]).min()))
        done += m
    return worst, worst >= 1 - 1e-12
