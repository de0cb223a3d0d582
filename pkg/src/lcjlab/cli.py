"""Command-line entry point: ``lcjlab <verb> [options]``.

Exit codes: 0 ok, 2 validation failure, 3 cap exceeded, 4 property-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import LabError, PropertyCheckError, ValidationError
from .experiments import KINDS, ExperimentConfig, load_config, run_experiment
from .generators import (cantor_space, dyadic_tree, laakso_stage, sphere_antipodal_sample, staircase_curve,
                         tree_leaves_ultrametric)
from .io import (curve_to_json, load_curve, load_pairs, load_space, pairs_to_json, save_space, write_json)
from .lipschitz import EXACT_CAP, lcj_ratio
from .martingale import laakso_instance, tree_instance
from .metric import from_euclidean
from .plot import plot_csv
from .ultrametric import DEFAULT_Q, ball_hierarchy, lcj_lower_certificate, phi_expectation_exact, sample_phi
from .variation import PairMeasure, pair_variation, pairs_from_curve

# per-verb defaults; config sections and then flags override them
DEFAULTS = {
    "global": {"seed": None, "threads": 1, "out": None},
    "gen": {"kind": "tree", "n": 3, "b": 2, "q": 0.2, "d": 3, "pairs": 5},
    "lvar": {"method": "exact", "cap": EXACT_CAP, "restarts": 10, "samples": 64, "families": "distance_to_point"},
    "instance": {"kind": "tree", "n": 2},
    "ultrametric": {"q": DEFAULT_Q, "depth": None, "mode": "certify"},
    "exp": {"kind": "euclid", "params": ""},
    "plot": {"x": None, "y": None, "series": None, "logx": False, "logy": False},
}
_CASTS = {"seed": int, "threads": int, "n": int, "b": int, "d": int, "pairs": int, "cap": int, "restarts": int,
          "samples": int, "depth": int, "q": float, "logx": lambda s: str(s).lower() in ("1", "true", "yes"),
          "logy": lambda s: str(s).lower() in ("1", "true", "yes")}


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS)
    p.add_argument("--config", default=argparse.SUPPRESS, help="INI file: [global] plus one section per verb")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="lcjlab", parents=[common],
                                     description="Lipschitz variation of jump sequences on finite metric spaces.")
    sub = parser.add_subparsers(dest="verb", required=True)
    S = argparse.SUPPRESS

    g = sub.add_parser("gen", parents=[common], help="generate a space (JSON)")
    g.add_argument("--kind", choices=("tree", "tree-leaves", "laakso", "cantor", "staircase", "sphere"), default=S)
    g.add_argument("--n", type=int, default=S, help="depth / level / word length")
    g.add_argument("--b", type=int, default=S, help="Cantor branching")
    g.add_argument("--q", type=float, default=S, help="Cantor ratio")
    g.add_argument("--d", type=int, default=S, help="dimension (staircase, sphere)")
    g.add_argument("--pairs", type=int, default=S, help="antipodal pairs (sphere)")

    lv = sub.add_parser("lvar", parents=[common], help="LVar and LCJ ratio of a pair measure or curve")
    lv.add_argument("--space", required=True)
    src = lv.add_mutually_exclusive_group(required=True)
    src.add_argument("--pairs")
    src.add_argument("--curve")
    lv.add_argument("--method", choices=("exact", "localsearch", "candidates"), default=S)
    lv.add_argument("--cap", type=int, default=S)
    lv.add_argument("--restarts", type=int, default=S)
    lv.add_argument("--samples", type=int, default=S)
    lv.add_argument("--families", default=S, help="comma-separated candidate families")

    ins = sub.add_parser("instance", parents=[common], help="adversarial tree/Laakso instance")
    ins.add_argument("--kind", choices=("tree", "laakso"), default=S)
    ins.add_argument("--n", type=int, default=S)

    u = sub.add_parser("ultrametric", parents=[common], help="ball hierarchy, Phi and c_star")
    u.add_argument("--space", required=True)
    u.add_argument("--q", type=float, default=S)
    u.add_argument("--depth", type=int, default=S)
    u.add_argument("--mode", choices=("sample", "expect", "certify"), default=S)
    u.add_argument("--x", help="first point label (expect mode)")
    u.add_argument("--y", help="second point label (expect mode)")

    e = sub.add_parser("exp", parents=[common], help="run an experiment or a config batch")
    e.add_argument("--kind", choices=KINDS + ("all",), default=S)
    e.add_argument("--params", default=S, help="key=value;key=value overrides, e.g. 'd=2 3 4;n=10'")

    pl = sub.add_parser("plot", parents=[common], help="SVG line plot from a result CSV")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--x", default=S)
    pl.add_argument("--y", default=S)
    pl.add_argument("--series", default=S)
    pl.add_argument("--logx", action="store_true", default=S)
    pl.add_argument("--logy", action="store_true", default=S)

    sub.add_parser("selftest", parents=[common], help="quick end-to-end consistency checks")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags."""
    opts = dict(DEFAULTS["global"])
    opts.update(DEFAULTS.get(args.verb, {}))
    cfg = getattr(args, "config", None)
    if cfg:
        cp = load_config(cfg)
        for section in ("global", args.verb):
            if cp.has_section(section):
                for k, v in cp[section].items():
                    opts[k] = _CASTS.get(k, str)(v)
    opts.update({k: v for k, v in vars(args).items() if k not in ("verb",)})
    opts["verb"] = args.verb
    return opts


def _emit(obj, out) -> None:
    if out:
        write_json(out, obj)
    else:
        json.dump(obj, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")


def cmd_gen(o) -> None:
    if not o["out"]:
        raise ValidationError("gen needs --out <file.json>")
    out = Path(o["out"])
    stem = out.with_suffix("")
    kind = o["kind"]
    if kind == "tree":
        space, spec = dyadic_tree(o["n"])
        write_json(f"{stem}.spec.json", spec.to_json())
    elif kind == "tree-leaves":
        space = tree_leaves_ultrametric(o["n"])
    elif kind == "laakso":
        space, stage = laakso_stage(o["n"])
        write_json(f"{stem}.spec.json", stage.to_json(space.labels))
    elif kind == "cantor":
        space, _ = cantor_space(o["b"], o["n"], o["q"])
    elif kind == "staircase":
        space, curve = staircase_curve(o["d"])
        write_json(f"{stem}.curve.json", curve_to_json(space, curve))
    else:
        seed = o["seed"] if o["seed"] is not None else 0
        pairs = sphere_antipodal_sample(o["d"], o["pairs"], seed)
        space = from_euclidean(np.array([p for pair in pairs for p in pair]))
        mu = PairMeasure(tuple((2 * i, 2 * i + 1, 1.0 / len(pairs)) for i in range(len(pairs))))
        write_json(f"{stem}.pairs.json", pairs_to_json(space, mu))
    save_space(out, space)


def cmd_lvar(o) -> None:
    space = load_space(o["space"])
    mu = load_pairs(o["pairs"], space) if o.get("pairs") else pairs_from_curve(load_curve(o["curve"], space))
    method = o["method"]
    seed = o["seed"] if o["seed"] is not None else 0
    kw = {"exact": {"cap": o["cap"]}, "localsearch": {"restarts": o["restarts"], "seed": seed},
          "candidates": {"families": [f.strip() for f in str(o["families"]).split(",")], "seed": seed,
                         "samples": o["samples"]}}[method]
    ratio, res = lcj_ratio(space, mu, method, **kw)
    _emit({"value": res.value, "var": pair_variation(space, mu), "ratio": ratio, "method": res.method,
           "exact": res.exact, "signs": list(res.signs),
           "witness": dict(zip(space.labels, res.witness.values.tolist())),
           "evaluations": res.evaluations, "elapsed_seconds": res.elapsed, "details": res.details}, o["out"])


def cmd_instance(o) -> None:
    if not o["out"]:
        raise ValidationError("instance needs --out <dir>")
    out = Path(o["out"])
    inst = tree_instance(o["n"]) if o["kind"] == "tree" else laakso_instance(o["n"])
    save_space(out / "space.json", inst.space)
    write_json(out / "pairs.json", pairs_to_json(inst.space, inst.measure))
    meta = inst.metadata()
    meta["exact_weights"] = [str(w) for w in inst.exact_weights]
    write_json(out / "certificate.json", meta)


def cmd_ultrametric(o) -> None:
    space = load_space(o["space"])
    q, D = o["q"], o["depth"]
    if o["mode"] == "certify":
        _emit(lcj_lower_certificate(space, q, D).to_json(), o["out"])
        return
    hier = ball_hierarchy(space, q, D)
    if o["mode"] == "sample":
        seed = o["seed"] if o["seed"] is not None else 0
        s = sample_phi(hier, seed)
        _emit({"seed": seed, "q": q, "depth": hier.D, "values": dict(zip(space.labels, s.values.tolist())),
               "eps": [e.tolist() for e in s.eps]}, o["out"])
        return
    if not (o.get("x") and o.get("y")):
        raise ValidationError("expect mode needs --x and --y labels")
    x, y = space.index(o["x"]), space.index(o["y"])
    _emit({"x": o["x"], "y": o["y"], "n0": hier.n0(x, y), "depth": hier.D, "q": q,
           "expectation": phi_expectation_exact(hier, x, y), "rho": float(space.dist[x, y])}, o["out"])


def _parse_params(s: str) -> dict:
    out = {}
    for part in str(s or "").split(";"):
        if part.strip():
            if "=" not in part:
                raise ValidationError(f"bad parameter {part!r}; expected key=value")
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def cmd_exp(o) -> None:
    out = o["out"] or "results"
    kinds = KINDS if o["kind"] == "all" else (o["kind"],)
    cfg_params = {}
    if o.get("config"):
        cp = load_config(o["config"])
        cfg_params = {s[4:]: dict(cp[s]) for s in cp.sections() if s.startswith("exp.")}
    for kind in kinds:
        params = dict(cfg_params.get(kind, {}))
        params.update(_parse_params(o["params"]))
        seed = o["seed"]
        if seed is None and "seed" in params:
            seed = int(params["seed"])
        params.pop("seed", None)
        table = run_experiment(ExperimentConfig(kind, params, seed, out, o["threads"]))
        for path in table.write(out):
            print(path)


def cmd_plot(o) -> None:
    if not (o["x"] and o["y"]):
        raise ValidationError("plot needs --x and --y columns")
    svg = plot_csv(o["csv"], o["x"], o["y"], o["series"], o["logx"], o["logy"])
    out = o["out"] or str(Path(o["csv"]).with_suffix(".svg"))
    Path(out).write_text(svg)
    print(out)


def cmd_selftest(o) -> None:
    from .lipschitz import lvar_exact
    from .martingale import (check_orthogonality, dyadic_martingale, proposition_chain, random_grid_lipschitz,
                             sixpoint_inequality_check)
    from .metric import random_lipschitz

    rng = np.random.default_rng(o["seed"] if o["seed"] is not None else 0)
    checks = []
    space, curve = staircase_curve(4)
    mu = pairs_from_curve(curve)
    checks.append(("staircase d=4 exact ratio >= 1/2", lvar_exact(space, mu).value / pair_variation(space, mu) >= 0.5))
    M = dyadic_martingale(random_grid_lipschitz(6, rng), 6)
    checks.append(("dyadic martingale orthogonality", check_orthogonality(M).passed))
    inst = tree_instance(2)
    checks.append(("tree N=2 chain", proposition_chain(inst, random_lipschitz(inst.space, rng).values).holds()))
    checks.append(("six-point inequality", sixpoint_inequality_check(10_000, 0)[1]))
    cs, _ = cantor_space(2, 4, 0.2)
    checks.append(("cantor c_star >= 0.04", lcj_lower_certificate(cs).c_star >= 0.04))
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if not all(ok for _, ok in checks):
        raise PropertyCheckError("selftest failed")


COMMANDS = {"gen": cmd_gen, "lvar": cmd_lvar, "instance": cmd_instance, "ultrametric": cmd_ultrametric,
            "exp": cmd_exp, "plot": cmd_plot, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        COMMANDS[args.verb](opts)
    except LabError as exc:
        print(f"lcjlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"lcjlab: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
