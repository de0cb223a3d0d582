"""Experiment drivers.  Each returns a :class:`ResultTable` whose CSV is a pure
function of the parameters (runtime only goes to the JSON mirror)."""

from __future__ import annotations

import configparser
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import numpy as np

from .errors import ValidationError
from .generators import (MAX_TREE_DEPTH, cantor_space, sphere_antipodal_sample, staircase_curve,
                         tree_leaf_spectrum, tree_leaves_ultrametric)
from .io import ResultTable
from .lipschitz import (EXACT_CAP, coordinate_projection_bound, lvar_candidates, lvar_exact,
                        lvar_localsearch, projection_draws)
from .martingale import laakso_instance, proposition_chain, sixpoint_inequality_check, tree_instance
from .metric import FiniteMetricSpace, from_euclidean, random_lipschitz
from .ultrametric import DEFAULT_Q, certificate_from_spectrum, lcj_lower_certificate
from .variation import PairMeasure, pair_variation, pairs_from_curve

KINDS = ("sphere", "levy", "tree", "laakso", "euclid", "ultrametric")
RATIO_COLUMNS = ("method", "atoms", "var", "lvar", "ratio", "reference", "reference_formula")


def _pmap(fn, cells, threads: int = 1):
    if threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _lvar(space, mu, method, seed, restarts=4, samples=64, families=None):
    if method == "exact":
        return lvar_exact(space, mu)
    if method == "localsearch":
        return lvar_localsearch(space, mu, restarts=restarts, seed=seed)
    if method == "candidates":
        return lvar_candidates(space, mu, families or ("distance_to_point", "distance_to_set", "mcshane_random"),
                               seed=seed, samples=samples)
    raise ValidationError(f"unknown method {method!r}")


# --- sphere -------------------------------------------------------------------------

def sphere_reference(d: int) -> float:
    eps = 4 * math.sqrt(math.log(d) / d)
    return (12 * math.exp(-d * eps ** 2 / 8) + 2 * eps) / 2


def _sphere_cell(cell):
    d, n, seed, method = cell
    pairs = sphere_antipodal_sample(d, n, seed)
    pts = np.array([p for pair in pairs for p in pair])
    space = from_euclidean(pts)
    mu = PairMeasure(tuple((2 * i, 2 * i + 1, 1.0 / n) for i in range(n)))
    t0 = time.perf_counter()
    res = _lvar(space, mu, method, seed)
    var = pair_variation(space, mu)
    return dict(d=d, n=n, seed=seed, method=method, atoms=n, var=var, lvar=res.value, ratio=res.value / var,
                reference=sphere_reference(d), reference_formula="(12*exp(-d*e**2/8)+2*e)/2, e=4*sqrt(log(d)/d)",
                runtime=time.perf_counter() - t0)


def exp_sphere(ds, n: int, seeds=(0,), method: str = "exact", threads: int = 1) -> ResultTable:
    if method == "exact" and n > EXACT_CAP:
        raise ValidationError(f"n = {n} exceeds the exact cap {EXACT_CAP}")
    t = ResultTable("sphere", ("d", "n", "seed") + RATIO_COLUMNS, sort_keys=("d", "n", "seed", "method"))
    for row in _pmap(_sphere_cell, [(int(d), int(n), int(s), method) for d in ds for s in seeds], threads):
        t.add(**row)
    return t


def sphere_medians(table: ResultTable) -> dict[int, float]:
    """Median ratio over seeds, per dimension."""
    out: dict[int, list] = {}
    for r in table.sorted_rows():
        out.setdefault(r["d"], []).append(r["ratio"])
    return {d: median(v) for d, v in out.items()}


# --- Levy probe ------------------------------------------------------------------------

LEVY_KINDS = ("coordinate", "distance_to_point", "random_projection", "constant")


@dataclass
class LevyResult:
    d: int
    eps: float
    samples: int
    f_kind: str
    median: float
    empirical: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 3 * self.stderr


def _sphere_points(rng, m, d):
    g = rng.standard_normal((m, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def exp_levy_probe(d: int, eps: float, samples: int, f_kind: str = "coordinate", seed: int = 0,
                   chunk: int = 10_000) -> LevyResult:
    """Tail ``P(|f - m| > eps)`` on S^{d-1}, with the median m estimated from a disjoint sample."""
    if d < 4:
        raise ValidationError("the concentration bound assumes d >= 4")
    if f_kind not in LEVY_KINDS:
        raise ValidationError(f"f_kind must be one of {LEVY_KINDS}")
    rng = np.random.default_rng(seed)
    p = _sphere_points(rng, 1, d)[0]
    h = _sphere_points(rng, 1, d)[0]

    def f(x):
        if f_kind == "coordinate":
            return x[:, 0]
        if f_kind == "distance_to_point":
            return np.linalg.norm(x - p, axis=1)
        if f_kind == "random_projection":
            return x @ h
        return np.zeros(len(x))

    def values(m):
        parts, left = [], m
        while left:
            k = min(chunk, left)
            parts.append(f(_sphere_points(rng, k, d)))
            left -= k
        return np.concatenate(parts)

    med = float(np.median(values(samples)))
    hits = int(np.count_nonzero(np.abs(values(samples) - med) > eps))
    emp = hits / samples
    stderr = math.sqrt(emp * (1 - emp) / samples)
    return LevyResult(d, eps, samples, f_kind, med, emp, stderr, 6 * math.exp(-d * eps ** 2 / 8))


def levy_table(results) -> ResultTable:
    t = ResultTable("levy", ("d", "eps", "samples", "f_kind", "empirical", "stderr", "bound", "passed"))
    for r in results:
        t.add(d=r.d, eps=r.eps, samples=r.samples, f_kind=r.f_kind, empirical=r.empirical,
              stderr=r.stderr, bound=r.bound, passed=r.passed)
    return t


# --- tree and Laakso ------------------------------------------------------------------

CERT_COLUMNS = ("certified", "sampled_max", "min_constant", "chain_holds")
TREE_TRUNCATION = 12


def _certificate(inst, fsamples: int, seed: int):
    rng = np.random.default_rng([seed, inst.N])
    worst_ratio, min_const, holds = 0.0, math.inf, True
    for _ in range(fsamples):
        f = random_lipschitz(inst.space, rng)
        rep = proposition_chain(inst, f.values)
        worst_ratio = max(worst_ratio, rep.ratio)
        min_const = min(min_const, rep.min_constant)
        holds &= rep.holds()
    return worst_ratio, min_const, holds


def certified_ratio(inst) -> float:
    """``kappa sqrt(L) / ((L - 1) / 2)``: the chain's bound on the ratio of any 1-Lipschitz f."""
    L = inst.levels
    return inst.kappa * math.sqrt(L) / ((L - 1) / 2)


def _instance_rows(name, inst, methods, fsamples, seed, extra):
    rows = []
    sampled, min_const, holds = _certificate(inst, fsamples, seed) if fsamples else (None,) * 3
    certified = certified_ratio(inst)
    L = inst.levels
    var = pair_variation(inst.space, inst.measure)
    base = dict(N=inst.N, levels=L, reference=1 / math.sqrt(L), reference_formula="L**-0.5",
                certified=certified, sampled_max=sampled, min_constant=min_const, chain_holds=holds, **extra)
    for method in methods:
        mu = inst.measure
        label = method
        if method == "exact" and len(mu) > EXACT_CAP:
            # evenly spaced atoms, so every level and group is represented
            keep = np.unique(np.linspace(0, len(mu) - 1, TREE_TRUNCATION).round().astype(int))
            mu = PairMeasure(tuple(mu.atoms[i] for i in keep))
            label = "exact_truncated"
        t0 = time.perf_counter()
        res = _lvar(inst.space, mu, method if method != "exact_truncated" else "exact", seed)
        v = pair_variation(inst.space, mu) if mu is not inst.measure else var
        rows.append(dict(base, method=label, atoms=len(mu), var=v, lvar=res.value, ratio=res.value / v,
                         runtime=time.perf_counter() - t0))
    return rows


def default_methods(kind: str, N: int) -> tuple[str, ...]:
    if kind == "tree":
        return {1: ("exact", "localsearch", "candidates"), 2: ("exact", "localsearch", "candidates")}.get(
            N, ("exact", "candidates"))
    return {1: ("exact", "candidates"), 2: ("exact", "localsearch", "candidates"),
            3: ("localsearch", "candidates")}.get(N, ("candidates",))


def best_lower_ratio(table: ResultTable) -> dict[int, float]:
    """Per N, the largest ratio among methods run on the full measure."""
    out: dict[int, float] = {}
    for r in table.sorted_rows():
        if r["method"] != "exact_truncated":
            out[r["N"]] = max(out.get(r["N"], 0.0), r["ratio"])
    return out


def exp_tree(Ns, methods=None, fsamples: int = 1000, seed: int = 0) -> ResultTable:
    t = ResultTable("tree", ("N", "levels") + RATIO_COLUMNS + CERT_COLUMNS, sort_keys=("N", "method"))
    for N in Ns:
        inst = tree_instance(int(N))
        for row in _instance_rows("tree", inst, methods or default_methods("tree", N), fsamples, seed, {}):
            t.add(**row)
        t.meta[f"N={N}"] = inst.metadata()
    return t


def exp_laakso(Ns, methods=None, fsamples: int = 1000, seed: int = 0, sixpoint_samples: int = 100_000) -> ResultTable:
    t = ResultTable("laakso", ("N", "levels") + RATIO_COLUMNS + CERT_COLUMNS + ("sixpoint_min",),
                    sort_keys=("N", "method"))
    six, _ = sixpoint_inequality_check(sixpoint_samples, seed)
    for N in Ns:
        inst = laakso_instance(int(N))
        for row in _instance_rows("laakso", inst, methods or default_methods("laakso", N), fsamples, seed,
                                  {"sixpoint_min": six}):
            t.add(**row)
        t.meta[f"N={N}"] = inst.metadata()
    t.meta["sixpoint"] = {"samples": sixpoint_samples, "min_ratio": six, "passed": six >= 1 - 1e-12}
    return t


# --- Euclidean lower bound ---------------------------------------------------------------

EXACT_STAIRCASE = 6


def exp_euclid_lower(ds, seed: int = 0, trials: int = 256) -> ResultTable:
    t = ResultTable("euclid", ("d",) + RATIO_COLUMNS + ("coord_bound", "proj_min", "proj_max"),
                    sort_keys=("d", "method"))
    ref = dict(reference_formula="d**-0.5")
    for d in ds:
        d = int(d)
        space, curve = staircase_curve(d)
        mu = pairs_from_curve(curve)
        var = pair_variation(space, mu)
        cb = coordinate_projection_bound(space, mu)
        # the coordinates are 1-Lipschitz, so their average variation bounds LVar from below
        t.add(d=d, method="coordinate", atoms=len(mu), var=var, lvar=cb / d, ratio=cb / d / var,
              reference=d ** -0.5, coord_bound=cb, **ref)
        draws = projection_draws(space, mu, trials, seed)
        mean = float(np.mean(draws))
        t.add(d=d, method="random_projection", atoms=len(mu), var=var, lvar=mean, ratio=mean / var,
              reference=d ** -0.5, proj_min=float(draws.min()), proj_max=float(draws.max()), **ref)
        if d <= EXACT_STAIRCASE:
            t0 = time.perf_counter()
            res = lvar_exact(space, mu)
            t.add(d=d, method="exact", atoms=len(mu), var=var, lvar=res.value, ratio=res.value / var,
                  reference=d ** -0.5, runtime=time.perf_counter() - t0, **ref)
    return t


# --- ultrametric ---------------------------------------------------------------------------

ULTRA_COLUMNS = ("space", "points", "q", "depth", "c_star", "C_q", "worst_pair", "crosscheck_min", "crosscheck_n",
                 "tree_N", "tree_certified")


def _normalized_leaf_spectrum(depth: int):
    vals, pairs = tree_leaf_spectrum(depth)
    labels = [(f"{depth}:{a}", f"{depth}:{b}") for a, b in pairs]
    return vals / vals.max(), labels


def _crosscheck(space: FiniteMetricSpace, rng, count: int, atoms: int = 5) -> float:
    worst = math.inf
    for _ in range(count):
        k = int(rng.integers(1, atoms + 1))
        xs = rng.choice(space.n, size=k)
        ys = (xs + rng.integers(1, space.n, size=k)) % space.n
        w = rng.integers(1, 4, size=k).astype(float)
        mu = PairMeasure(tuple(zip(xs.tolist(), ys.tolist(), w.tolist())))
        worst = min(worst, lvar_exact(space, mu).value / pair_variation(space, mu))
    return worst


def exp_ultrametric(cantor=((2, 6, 0.2), (3, 4, 0.2), (2, 8, 0.2)), leaf_depths=tuple(range(2, MAX_TREE_DEPTH + 1)),
                    q: float = DEFAULT_Q, crosscheck: int = 20, seed: int = 0, tree_Ns=()) -> ResultTable:
    """Certificates for Cantor spaces and tree-leaf sets; optionally the whole-tree certified
    upper bound alongside the leaf row of matching depth (``2**N``)."""
    t = ResultTable("ultrametric", ULTRA_COLUMNS, sort_keys=("space", "points"))
    rng = np.random.default_rng(seed)
    for b, D, qq in cantor:
        space, _ = cantor_space(int(b), int(D), float(qq))
        t0 = time.perf_counter()
        cert = lcj_lower_certificate(space, q)
        cc = _crosscheck(space, rng, crosscheck) if crosscheck else None
        t.add(space=f"cantor(b={b},D={D},q={qq})", points=space.n, q=q, depth=cert.D, c_star=cert.c_star,
              C_q=cert.C_q, worst_pair="|".join(cert.worst_pair), crosscheck_min=cc,
              crosscheck_n=crosscheck or None, runtime=time.perf_counter() - t0)
    tree_cert = {}
    for N in tree_Ns:
        inst = tree_instance(int(N))
        tree_cert[inst.spec.depth] = (int(N), certified_ratio(inst))
    for depth in leaf_depths:
        depth = int(depth)
        if depth < 1:
            raise ValidationError("leaf depth must be at least 1")
        t0 = time.perf_counter()
        vals, labels = _normalized_leaf_spectrum(depth)
        cert = certificate_from_spectrum(vals, q, pair_labels=labels)
        cc = None
        if crosscheck and 2 ** depth <= 64:
            leaves = tree_leaves_ultrametric(depth)
            cc = _crosscheck(FiniteMetricSpace(leaves.labels, leaves.dist / depth), rng, crosscheck)
        tN, tc = tree_cert.get(depth, (None, None))
        t.add(space=f"tree_leaves(depth={depth:02d})", points=2 ** depth, q=q, depth=cert.D, c_star=cert.c_star,
              C_q=cert.C_q, worst_pair="|".join(cert.worst_pair), crosscheck_min=cc,
              crosscheck_n=crosscheck if cc is not None else None, tree_N=tN, tree_certified=tc,
              runtime=time.perf_counter() - t0)
    return t


# --- config-driven batch runner ------------------------------------------------------------

def _ints(s):
    return tuple(int(x) for x in str(s).replace(",", " ").split())


def _floats(s):
    return tuple(float(x) for x in str(s).replace(",", " ").split())


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    out: str = "results"
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        randomized = self.kind != "euclid"
        if randomized and self.seed is None:
            raise ValidationError(f"experiment {self.kind!r} is randomized and needs a seed")


def run_experiment(cfg: ExperimentConfig):
    p = cfg.params
    seed = cfg.seed if cfg.seed is not None else 0
    if cfg.kind == "sphere":
        return exp_sphere(_ints(p.get("d", "2 3 4 6")), int(p.get("n", 10)), _ints(p.get("seeds", seed)),
                          p.get("method", "exact"), cfg.threads)
    if cfg.kind == "levy":
        kinds = str(p.get("f_kind", "coordinate")).replace(",", " ").split()
        res = [exp_levy_probe(int(p.get("d", 400)), float(p.get("eps", 0.3)), int(p.get("samples", 100_000)), k, seed)
               for k in kinds]
        return levy_table(res)
    if cfg.kind == "tree":
        methods = str(p["methods"]).replace(",", " ").split() if "methods" in p else None
        return exp_tree(_ints(p.get("n", "1 2 3")), methods, int(p.get("fsamples", 1000)), seed)
    if cfg.kind == "laakso":
        methods = str(p["methods"]).replace(",", " ").split() if "methods" in p else None
        return exp_laakso(_ints(p.get("n", "1 2 3 4")), methods, int(p.get("fsamples", 1000)), seed,
                          int(p.get("sixpoint_samples", 100_000)))
    if cfg.kind == "euclid":
        return exp_euclid_lower(_ints(p.get("d", "1 2 3 4 5 6 8 16")), seed, int(p.get("trials", 256)))
    cantor = p.get("cantor", "2,6,0.2; 3,4,0.2; 2,8,0.2")
    cantor = tuple(_floats(c) for c in str(cantor).split(";") if c.strip())
    cantor = tuple((int(b), int(D), qq) for b, D, qq in cantor)
    return exp_ultrametric(cantor, _ints(p.get("leaf_depths", " ".join(map(str, range(2, 17))))),
                           float(p.get("q", DEFAULT_Q)), int(p.get("crosscheck", 20)), seed,
                           _ints(p.get("tree_n", "")))


def load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValidationError(f"cannot read config file {path}")
    return cp


def run_config(path, out=None, seed=None, threads=None) -> list[Path]:
    """Run every ``[exp.<kind>]`` section; ``[global]`` supplies seed/out/threads.
    Explicit arguments override the file."""
    cp = load_config(path)
    g = cp["global"] if cp.has_section("global") else {}
    out = out or g.get("out", "results")
    seed = seed if seed is not None else (int(g["seed"]) if "seed" in g else None)
    threads = threads or int(g.get("threads", 1))
    written = []
    for section in cp.sections():
        if not section.startswith("exp."):
            continue
        params = dict(cp[section])
        s = int(params.pop("seed")) if "seed" in params else seed
        cfg = ExperimentConfig(section[4:], params, s, out, threads)
        written.extend(run_experiment(cfg).write(out))
    return written
