"""Lipschitz variation of pair measures.

``LVar(mu) = sup { sum_i w_i |f(x_i) - f(y_i)| : f 1-Lipschitz }``.  For a fixed
sign pattern ``s`` the inner supremum of ``sum_i s_i w_i (f(x_i) - f(y_i))`` is
a Kantorovich-Rubinstein problem, i.e. a min-cost transport between the
positive and negative parts of the signed measure ``sum_i s_i w_i (d_x - d_y)``.
Maximizing over all patterns is exhaustive because for a fixed ``f`` the best
sign is ``sign(f(x_i) - f(y_i))``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceededError, PropertyCheckError, ValidationError
from .metric import (FiniteMetricSpace, LipschitzFunction, certify, inf_convolution,
                     is_ultrametric, lipschitz_constant, random_lipschitz)
from .transport import min_cost_transport
from .variation import PairMeasure, pair_score, pair_variation

EXACT_CAP = 20
GAP_TOL = 1e-9
FAMILIES = ("distance_to_point", "distance_to_set", "random_projection", "mcshane_random", "ultrametric_phi")


@dataclass(frozen=True)
class SignedMeasure:
    charge: np.ndarray

    def __post_init__(self):
        c = np.array(self.charge, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValidationError("charge must be a nonempty vector")
        scale = max(1.0, float(np.abs(c).sum()))
        if abs(math.fsum(c)) > 1e-12 * scale:
            raise ValidationError(f"signed measure is unbalanced: total charge {math.fsum(c):.3g}")
        c.setflags(write=False)
        object.__setattr__(self, "charge", c)

    @classmethod
    def from_pairs(cls, n: int, mu: PairMeasure, signs: Sequence[int]) -> "SignedMeasure":
        c = np.zeros(n)
        w = mu.weights * np.asarray(signs, dtype=float)
        np.add.at(c, mu.xs, w)
        np.add.at(c, mu.ys, -w)
        return cls(c)


@dataclass(frozen=True)
class TransportPlan:
    flows: tuple[tuple[int, int, float], ...]
    cost: float


@dataclass
class LVarResult:
    value: float
    witness: LipschitzFunction
    signs: tuple[int, ...]
    exact: bool
    method: str = "exact"
    evaluations: int = 0
    elapsed: float = 0.0
    details: dict = field(default_factory=dict)


def kantorovich_value(space: FiniteMetricSpace, c: SignedMeasure, check: bool = True):
    """``sup_{f 1-Lip} sum_p c_p f(p)`` as a min-cost transport.

    Returns ``(value, plan, potentials)``; the potentials are a 1-Lipschitz
    function on the whole space attaining the value.
    """
    charge = c.charge
    if charge.shape != (space.n,):
        raise ValidationError("charge vector does not match the space")
    scale = max(float(np.abs(charge).sum()), 1e-300)
    tiny = 1e-14 * scale
    src = np.flatnonzero(charge > tiny)
    snk = np.flatnonzero(charge < -tiny)
    if src.size == 0 or snk.size == 0:
        return 0.0, TransportPlan((), 0.0), certify(space, np.zeros(space.n))
    a = charge[src]
    b = -charge[snk]
    # absorb sub-tolerance imbalance left by netting into the larger side
    gap = a.sum() - b.sum()
    if gap > 0:
        b = b * (a.sum() / b.sum())
    elif gap < 0:
        a = a * (b.sum() / a.sum())
    cost = space.dist[np.ix_(src, snk)]
    F, primal, _, beta = min_cost_transport(cost, a, b)
    # 1-Lipschitz extension of the sink potentials: f(x) = min_j (-beta_j + rho(x, t_j))
    f = inf_convolution(space, snk, -beta, 1.0)
    dual = math.fsum(charge * f)
    if check:
        if abs(primal - dual) > GAP_TOL * max(1.0, abs(primal)):
            raise PropertyCheckError(f"duality gap {primal - dual:.3g} exceeds tolerance")
    flows = tuple((int(src[i]), int(snk[j]), float(F[i, j])) for i, j in zip(*np.nonzero(F)))
    return primal, TransportPlan(flows, primal), LipschitzFunction(f, 1.0)


def _pattern_value(space, mu, signs):
    return kantorovich_value(space, SignedMeasure.from_pairs(space.n, mu, signs))


def _gray_patterns(n: int):
    """Sign patterns with the first sign fixed to +1, in Gray-code order."""
    for g in range(2 ** (n - 1)):
        code = g ^ (g >> 1)
        yield (1,) + tuple(-1 if (code >> (n - 2 - i)) & 1 else 1 for i in range(n - 1))


def _better(value, signs, best_value, best_signs, rtol=1e-12):
    if best_signs is None:
        return True
    tol = rtol * max(1.0, abs(best_value))
    if value > best_value + tol:
        return True
    return value >= best_value - tol and signs < best_signs


def _finish(space, mu, value, f, signs, exact, method, evals, t0, **details) -> LVarResult:
    score = pair_score(mu, f)
    if abs(score - value) > GAP_TOL * max(1.0, value):
        raise PropertyCheckError(f"witness scores {score} but the computed value is {value}")
    witness = LipschitzFunction(np.asarray(f), 1.0)
    return LVarResult(value, witness, tuple(signs), exact, method, evals, time.perf_counter() - t0, details)


def lvar_exact(space: FiniteMetricSpace, mu: PairMeasure, cap: int = EXACT_CAP) -> LVarResult:
    """Exact LVar by enumerating the 2**(n-1) sign patterns."""
    mu.check_host(space)
    n = len(mu)
    if n > cap:
        raise CapExceededError(f"{n} atoms exceeds the exact cap {cap}; use localsearch or candidates")
    t0 = time.perf_counter()
    best_v, best_s, best_f = -1.0, None, None
    evals = 0
    for signs in _gray_patterns(n):
        v, _, pot = _pattern_value(space, mu, signs)
        evals += 1
        if _better(v, signs, best_v, best_s):
            best_v, best_s, best_f = v, signs, pot.values
    return _finish(space, mu, best_v, best_f, best_s, True, "exact", evals, t0)


def lvar_localsearch(space: FiniteMetricSpace, mu: PairMeasure, restarts: int = 10, seed: int = 0) -> LVarResult:
    """Best single-flip local optimum over random restarts; a lower bound on LVar.

    Restart ``r`` draws its start from ``(seed, r)`` alone, so raising ``restarts``
    never lowers the result.
    """
    if restarts < 1:
        raise ValidationError("restarts must be at least 1")
    mu.check_host(space)
    n = len(mu)
    t0 = time.perf_counter()
    cache: dict[tuple, tuple[float, np.ndarray]] = {}

    def evaluate(signs):
        hit = cache.get(signs)
        if hit is None:
            v, _, pot = _pattern_value(space, mu, signs)
            hit = cache[signs] = (v, pot.values)
        return hit

    best_v, best_s, best_f = -1.0, None, None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        signs = (1,) + tuple(int(s) for s in rng.choice([-1, 1], size=n - 1))
        v, f = evaluate(signs)
        improved = True
        while improved:
            improved = False
            for i in range(1, n):
                cand = signs[:i] + (-signs[i],) + signs[i + 1:]
                cv, cf = evaluate(cand)
                if cv > v + 1e-12 * max(1.0, v):
                    signs, v, f = cand, cv, cf
                    improved = True
        if _better(v, signs, best_v, best_s):
            best_v, best_s, best_f = v, signs, f
    return _finish(space, mu, best_v, best_f, best_s, False, "localsearch", len(cache), t0, restarts=restarts)


def _candidate_functions(space, mu, families, seed, samples):
    rng = np.random.default_rng(seed)
    support = mu.support()
    for fam in families:
        if fam not in FAMILIES:
            raise ValidationError(f"unknown candidate family {fam!r}")
        if fam == "distance_to_point":
            for p in range(space.n):
                yield fam, space.dist[:, p]
        elif fam == "distance_to_set":
            for _ in range(samples):
                k = int(rng.integers(1, len(support) + 1))
                sub = rng.choice(support, size=k, replace=False)
                yield fam, space.dist[:, sub].min(axis=1)
        elif fam == "random_projection":
            if space.coords is None:
                raise ValidationError("random_projection needs a Euclidean host with coordinates")
            d = space.coords.shape[1]
            for _ in range(samples):
                h = rng.choice([-1.0, 1.0], size=d) / math.sqrt(d)
                yield fam, space.coords @ h
        elif fam == "mcshane_random":
            for _ in range(samples):
                yield fam, random_lipschitz(space, rng).values
        elif fam == "ultrametric_phi":
            from .ultrametric import ball_hierarchy, sample_phi

            ok, _ = is_ultrametric(space)
            if not ok:
                raise ValidationError("ultrametric_phi needs an ultrametric host")
            hier = ball_hierarchy(space)
            lip = 1.0 / hier.C
            for _ in range(samples):
                yield fam, sample_phi(hier, int(rng.integers(2 ** 63))).values * lip


def lvar_candidates(space: FiniteMetricSpace, mu: PairMeasure, families: Iterable[str] = ("distance_to_point",),
                    seed: int = 0, samples: int = 64) -> LVarResult:
    """Best score over sampled 1-Lipschitz candidates; a lower bound on LVar."""
    mu.check_host(space)
    t0 = time.perf_counter()
    supp = np.asarray(mu.support())
    sub = space.dist[np.ix_(supp, supp)]
    iu, ju = np.triu_indices(supp.size, 1)
    best_v, best_f, best_fam = -1.0, None, None
    evals = 0
    for fam, f in _candidate_functions(space, mu, tuple(families), seed, samples):
        fs = f[supp]
        if supp.size > 1:
            # 1-Lipschitz on the support suffices: McShane extends it without loss
            L = float(np.max(np.abs(fs[iu] - fs[ju]) / sub[iu, ju]))
            if L > 1 + 1e-9:
                raise PropertyCheckError(f"candidate from {fam} has Lipschitz constant {L}")
        v = pair_score(mu, f)
        evals += 1
        if v > best_v:
            best_v, best_f, best_fam = v, f, fam
    if best_f is None:
        raise ValidationError("no candidate functions were generated")
    f = inf_convolution(space, supp, best_f[supp], 1.0)
    signs = tuple(1 if f[x] >= f[y] else -1 for x, y, _ in mu.atoms)
    return _finish(space, mu, best_v, f, signs, False, "candidates", evals, t0, best_family=best_fam)


def lcj_ratio(space: FiniteMetricSpace, mu: PairMeasure, method: str = "exact", **kw) -> tuple[float, LVarResult]:
    """LVar estimate divided by ``sum w rho``; in (0, 1] for the exact method."""
    if method == "exact":
        res = lvar_exact(space, mu, **kw)
    elif method == "localsearch":
        res = lvar_localsearch(space, mu, **kw)
    elif method == "candidates":
        res = lvar_candidates(space, mu, **kw)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return res.value / pair_variation(space, mu), res


def _euclidean_diffs(space: FiniteMetricSpace, mu: PairMeasure) -> np.ndarray:
    if space.coords is None:
        raise ValidationError("projection bounds need a Euclidean host with coordinates")
    mu.check_host(space)
    return space.coords[mu.xs] - space.coords[mu.ys]


def coordinate_projection_bound(space: FiniteMetricSpace, mu: PairMeasure) -> float:
    """``sum_j sum_i w_i |<x_i - y_i, e_j>|``: the summed variation of all coordinate projections."""
    diffs = _euclidean_diffs(space, mu)
    return math.fsum(mu.weights * np.abs(diffs).sum(axis=1))


def random_projection_bound(space: FiniteMetricSpace, mu: PairMeasure, trials: int = 1000,
                            seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``sum_i w_i |<h, x_i - y_i>|`` with
    ``h = d**-0.5 * (random signs)``; every draw is itself a lower bound on LVar."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    diffs = _euclidean_diffs(space, mu)
    d = diffs.shape[1]
    rng = np.random.default_rng(seed)
    H = rng.choice([-1.0, 1.0], size=(trials, d)) / math.sqrt(d)
    draws = np.abs(H @ diffs.T) @ mu.weights
    stderr = float(draws.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(draws.mean()), stderr


def projection_draws(space: FiniteMetricSpace, mu: PairMeasure, trials: int, seed: int) -> np.ndarray:
    diffs = _euclidean_diffs(space, mu)
    d = diffs.shape[1]
    H = np.random.default_rng(seed).choice([-1.0, 1.0], size=(trials, d)) / math.sqrt(d)
    return np.abs(H @ diffs.T) @ mu.weights
