"""Ball hierarchies of ultrametric spaces, the random function Phi and the
resulting lower certificate on the LCJ ratio.

Scale-n blocks are the classes of ``rho <= q**n``.  For a pair separated first
at scale ``n0``, ``Phi(x) - Phi(y) = sum_{n=n0}^{D} q**n (e_n - e'_n)`` with
independent fair bits, so its law depends only on ``(n0, D, q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import CapExceededError, ValidationError
from .metric import FiniteMetricSpace, is_ultrametric

DEFAULT_Q = 0.2
MAX_ENUM_LEVELS = 24
MAX_AUTO_DEPTH = 60
_REL = 1e-12


def _scale(q: float, n: int) -> float:
    return q ** n * (1 + _REL)


def default_depth(min_distance: float, q: float) -> int:
    """Smallest D with ``q**D < min_distance``, so the finest scale separates every pair."""
    D = 1
    while not q ** D < min_distance * (1 - _REL):
        D += 1
        if D > MAX_AUTO_DEPTH:
            raise CapExceededError("minimum distance too small for an automatic depth")
    return D


def separation_scale(rho, q: float, D: int):
    """``n0``: the first scale in 1..D at which a pair at distance ``rho`` is split (0 if never)."""
    rho = np.asarray(rho, dtype=float)
    n0 = np.zeros(rho.shape, dtype=int)
    for n in range(D, 0, -1):
        n0 = np.where(rho > _scale(q, n), n, n0)
    return n0


@dataclass(frozen=True)
class BallHierarchy:
    space: FiniteMetricSpace
    q: float
    D: int
    blocks: tuple[np.ndarray, ...]  # blocks[n - 1][i] = block of point i at scale n
    centers: tuple[tuple[int, ...], ...]

    @property
    def C(self) -> float:
        """Certified Lipschitz constant of Phi on an exact ultrametric."""
        return 1.0 / (1.0 - self.q)

    @property
    def C_loose(self) -> float:
        """Constant for spaces only equivalent to an ultrametric."""
        return 2.0 / (1.0 - self.q)

    def n_blocks(self, n: int) -> int:
        return len(self.centers[n - 1])

    def n0(self, x: int, y: int) -> int:
        return int(separation_scale(self.space.dist[x, y], self.q, self.D))


def ball_hierarchy(space: FiniteMetricSpace, q: float = DEFAULT_Q, D: int | None = None) -> BallHierarchy:
    if not 0 < q < 1:
        raise ValidationError("q must lie in (0, 1)")
    if space.n < 2:
        raise ValidationError("an ultrametric certificate needs at least two points")
    ok, witness = is_ultrametric(space)
    if not ok:
        i, k, j = witness
        raise ValidationError(
            f"not an ultrametric: rho({space.labels[i]},{space.labels[j]}) exceeds "
            f"max(rho({space.labels[i]},{space.labels[k]}), rho({space.labels[k]},{space.labels[j]}))")
    off = space.dist[~np.eye(space.n, dtype=bool)]
    if D is None:
        D = default_depth(float(off.min()), q)
    if D < 1:
        raise ValidationError("depth must be at least 1")
    order = sorted(range(space.n), key=lambda i: space.labels[i])
    rank = np.empty(space.n, dtype=int)
    rank[order] = np.arange(space.n)
    blocks, centers = [], []
    prev = None
    for n in range(1, D + 1):
        r = _scale(q, n)
        _, comp = connected_components(space.dist <= r, directed=False)
        # renumber blocks by their lexicographically least member
        least = {}
        for i in order:
            least.setdefault(int(comp[i]), i)
        cen = sorted(least.values(), key=lambda i: rank[i])
        relabel = {int(comp[c]): b for b, c in enumerate(cen)}
        blk = np.array([relabel[int(c)] for c in comp])
        different = blk[:, None] != blk[None, :]
        if different.any() and not space.dist[different].min() > r:
            raise ValidationError(f"scale-{n} blocks are not separated by more than q**{n}")
        if prev is not None:
            same_now = blk[:, None] == blk[None, :]
            if np.any(same_now & (prev[:, None] != prev[None, :])):
                raise ValidationError(f"scale-{n} blocks do not refine scale-{n - 1} blocks")
        blocks.append(blk)
        centers.append(tuple(cen))
        prev = blk
    return BallHierarchy(space, q, D, tuple(blocks), tuple(centers))


@dataclass(frozen=True)
class PhiSample:
    values: np.ndarray
    seed: int
    q: float
    eps: tuple[np.ndarray, ...]  # eps[n - 1][j] for block j at scale n


def sample_phi_batch(hier: BallHierarchy, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent realizations of Phi, one per row."""
    out = np.zeros((count, hier.space.n))
    for n in range(1, hier.D + 1):
        eps = rng.integers(0, 2, size=(count, hier.n_blocks(n)))
        out += hier.q ** n * eps[:, hier.blocks[n - 1]]
    return out


def sample_phi(hier: BallHierarchy, seed: int) -> PhiSample:
    rng = np.random.default_rng(seed)
    eps = tuple(rng.integers(0, 2, size=hier.n_blocks(n)) for n in range(1, hier.D + 1))
    values = np.zeros(hier.space.n)
    for n in range(1, hier.D + 1):
        values += hier.q ** n * eps[n - 1][hier.blocks[n - 1]]
    return PhiSample(values, seed, hier.q, eps)


def _half_sums(q: float, exps: list[int]):
    """Values and probabilities of ``sum q**t d_t`` with ``d_t`` in {-1, 0, 1} w.p. 1/4, 1/2, 1/4."""
    vals = np.zeros(1)
    probs = np.ones(1)
    for t in exps:
        s = q ** t
        vals = np.concatenate([vals - s, vals, vals + s])
        probs = np.concatenate([probs * 0.25, probs * 0.5, probs * 0.25])
    return vals, probs


@lru_cache(maxsize=4096)
def expected_gap(n0: int, D: int, q: float) -> float:
    """Exact ``E|Phi(x) - Phi(y)|`` for a pair first separated at scale ``n0``.

    Meet in the middle: the levels split into two halves; for each value ``a`` of
    the first half, ``E|a + B|`` follows from sorted prefix sums of the second.
    """
    if not 1 <= n0 <= D:
        raise ValidationError(f"pair is not separated within depth {D}")
    m = D - n0 + 1
    if m > MAX_ENUM_LEVELS:
        raise CapExceededError(f"{m} levels exceed the enumeration cap {MAX_ENUM_LEVELS}; "
                               "use the analytic bound q**n0 / 2 - q**(n0 + 1) / (1 - q)")
    levels = list(range(n0, D + 1))
    h = m // 2
    av, ap = _half_sums(q, levels[:h])
    bv, bp = _half_sums(q, levels[h:])
    o = np.argsort(bv, kind="stable")
    bv, bp = bv[o], bp[o]
    cp = np.concatenate([[0.0], np.cumsum(bp)])
    cm = np.concatenate([[0.0], np.cumsum(bp * bv)])
    total_p, total_m = cp[-1], cm[-1]
    # E|a + B| = sum_{B >= -a} p (a + B) - sum_{B < -a} p (a + B)
    k = np.searchsorted(bv, -av, side="left")
    lo_p, lo_m = cp[k], cm[k]
    hi_p, hi_m = total_p - lo_p, total_m - lo_m
    per_a = av * (hi_p - lo_p) + (hi_m - lo_m)
    return math.fsum(ap * per_a)


def phi_expectation_exact(hier: BallHierarchy, x: int, y: int) -> float:
    if x == y:
        raise ValidationError("phi_expectation_exact needs two distinct points")
    return expected_gap(hier.n0(x, y), hier.D, hier.q)


@dataclass(frozen=True)
class UltrametricCertificate:
    c_star: float
    worst_pair: tuple[str, str] | None
    q: float
    D: int
    C_q: float
    c_star_loose: float

    def to_json(self) -> dict:
        return {"c_star": self.c_star, "worst_pair": list(self.worst_pair) if self.worst_pair else None,
                "C_q": self.C_q, "q": self.q, "depth": self.D, "c_star_loose": self.c_star_loose,
                "C_q_loose": 2.0 / (1.0 - self.q)}


def certificate_from_spectrum(distances, q: float = DEFAULT_Q, D: int | None = None,
                              pair_labels=None) -> UltrametricCertificate:
    """Certificate from the distinct distances of an ultrametric (the law of each pair only
    depends on its distance), for spaces too large to hold densely."""
    rho = np.asarray(distances, dtype=float)
    if rho.size == 0 or np.any(rho <= 0):
        raise ValidationError("need at least one positive distance")
    if D is None:
        D = default_depth(float(rho.min()), q)
    n0 = separation_scale(rho, q, D)
    if np.any(n0 == 0):
        raise ValidationError(f"depth {D} leaves some pairs unseparated")
    C = 1.0 / (1.0 - q)
    ratios = np.array([expected_gap(int(a), D, q) for a in n0]) / (C * rho)
    i = int(np.argmin(ratios))
    worst = tuple(pair_labels[i]) if pair_labels is not None else None
    return UltrametricCertificate(float(ratios[i]), worst, q, D, C, float(ratios[i]) / 2)


def lcj_lower_certificate(space: FiniteMetricSpace, q: float = DEFAULT_Q, D: int | None = None) -> UltrametricCertificate:
    """``c_star = min_{x != y} E|Phi(x) - Phi(y)| / (C(q) rho(x, y))``; LCJ(space) >= c_star."""
    hier = ball_hierarchy(space, q, D)
    iu, ju = np.triu_indices(space.n, 1)
    rho = space.dist[iu, ju]
    n0 = separation_scale(rho, q, hier.D)
    gaps = {int(a): expected_gap(int(a), hier.D, q) for a in np.unique(n0)}
    ratios = np.array([gaps[int(a)] for a in n0]) / (hier.C * rho)
    k = int(np.argmin(ratios))  # first minimizer in (i, j) order
    pair = (space.labels[iu[k]], space.labels[ju[k]])
    return UltrametricCertificate(float(ratios[k]), pair, q, hier.D, hier.C, float(ratios[k]) / 2)
