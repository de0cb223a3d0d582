"""JSON formats for spaces, pair measures and curves, plus CSV/JSON result tables."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .metric import FiniteMetricSpace, from_weighted_graph, validate_metric
from .variation import PairMeasure, StepCurve

FORMAT_VERSION = 1


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from exc


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def space_to_json(space: FiniteMetricSpace) -> dict:
    out = {"version": FORMAT_VERSION, "labels": list(space.labels), "dist": space.dist.tolist()}
    if space.coords is not None:
        out["coords"] = space.coords.tolist()
    if space.graph is not None:
        out["graph"] = {"edges": [list(e) for e in space.graph["edges"]], "scale": space.graph["scale"]}
    return out


def space_from_json(obj: dict) -> FiniteMetricSpace:
    if "labels" not in obj:
        raise ValidationError("space JSON needs 'labels'")
    labels = [str(x) for x in obj["labels"]]
    if "dist" in obj:
        coords = np.asarray(obj["coords"], dtype=float) if "coords" in obj else None
        graph = None
        if "graph" in obj:
            graph = {"edges": tuple(tuple(e) for e in obj["graph"]["edges"]), "scale": float(obj["graph"]["scale"])}
        space = FiniteMetricSpace(tuple(labels), np.asarray(obj["dist"], dtype=float), coords=coords, graph=graph)
        report = validate_metric(space.dist)
        if not report.valid:
            i, k, j, slack = report.violations[0]
            raise ValidationError(f"triangle inequality fails: rho({labels[i]},{labels[k]}) exceeds "
                                  f"rho({labels[i]},{labels[j]}) + rho({labels[j]},{labels[k]}) by {slack:.3g}")
        return space
    if "graph" in obj:
        g = obj["graph"]
        return from_weighted_graph(labels, [tuple(e) for e in g["edges"]], float(g.get("scale", 1.0)))
    raise ValidationError("space JSON needs 'dist' or 'graph'")


def load_space(path) -> FiniteMetricSpace:
    return space_from_json(_read_json(path))


def save_space(path, space: FiniteMetricSpace) -> None:
    write_json(path, space_to_json(space))


def pairs_to_json(space: FiniteMetricSpace, mu: PairMeasure) -> dict:
    return {"atoms": [[space.labels[x], space.labels[y], w] for x, y, w in mu.atoms]}


def pairs_from_json(space: FiniteMetricSpace, obj: dict) -> PairMeasure:
    try:
        atoms = obj["atoms"]
        return PairMeasure(tuple((space.index(a), space.index(b), float(w)) for a, b, w in atoms))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad pair-measure JSON: {exc}") from exc


def load_pairs(path, space: FiniteMetricSpace) -> PairMeasure:
    return pairs_from_json(space, _read_json(path))


def curve_to_json(space: FiniteMetricSpace, curve: StepCurve) -> dict:
    return {"points": [space.labels[p] for p in curve.points]}


def load_curve(path, space: FiniteMetricSpace) -> StepCurve:
    obj = _read_json(path)
    if "points" not in obj:
        raise ValidationError("curve JSON needs 'points'")
    return StepCurve(tuple(space.index(p) for p in obj["points"]))


# --- result tables ------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else str(float(v))
    return str(v)


@dataclass
class ResultTable:
    """Rows with a fixed column order.  Runtime lives only in the JSON mirror so the
    CSV is byte-identical across reruns."""

    name: str
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    sort_keys: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def add(self, **row) -> None:
        runtime = row.pop("runtime", None)
        unknown = set(row) - set(self.columns)
        if unknown:
            raise ValidationError(f"unknown columns {sorted(unknown)} for table {self.name}")
        var, lvar, ratio = row.get("var"), row.get("lvar"), row.get("ratio")
        if var is not None and lvar is not None and ratio is not None:
            if abs(ratio - lvar / var) > 1e-12 * max(1.0, abs(ratio)):
                raise ValidationError(f"ratio column disagrees with lvar/var in table {self.name}")
        row["_runtime"] = runtime
        self.rows.append(row)

    def sorted_rows(self) -> list[dict]:
        keys = self.sort_keys or self.columns
        return sorted(self.rows, key=lambda r: tuple(_sort_key(r.get(k)) for k in keys))

    def column(self, name: str, **where) -> list:
        return [r.get(name) for r in self.sorted_rows() if all(r.get(k) == v for k, v in where.items())]

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.sorted_rows():
            w.writerow([_cell(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> dict:
        rows = []
        for r in self.sorted_rows():
            row = {c: _plain(r.get(c)) for c in self.columns}
            row["runtime"] = r.get("_runtime")
            rows.append(row)
        return {"name": self.name, "columns": list(self.columns), "rows": rows, "meta": _plain(self.meta)}

    def write(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = outdir / f"{self.name}.csv", outdir / f"{self.name}.json"
        csv_path.write_text(self.to_csv())
        write_json(json_path, self.to_json())
        return csv_path, json_path


def _sort_key(v):
    if v is None:
        return (0, 0, "")
    if isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool):
        return (1, float(v), "")
    return (2, 0, str(v))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return list(r.fieldnames or []), list(r)
