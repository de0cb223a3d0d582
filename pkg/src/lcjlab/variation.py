"""Step curves, pair measures, and the reductions between them.

A piecewise-constant curve is stored only through its jump sequence; its
total variation is then the plain sum of consecutive distances, which is
exactly the partition supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .metric import FiniteMetricSpace


@dataclass(frozen=True)
class StepCurve:
    points: tuple[int, ...]

    def __post_init__(self):
        pts = tuple(int(p) for p in self.points)
        if not pts:
            raise ValidationError("a curve needs at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def check_host(self, space: FiniteMetricSpace) -> None:
        bad = [p for p in self.points if not 0 <= p < space.n]
        if bad:
            raise ValidationError(f"curve references points {bad[:5]} outside the host space")


@dataclass(frozen=True)
class PairMeasure:
    """Finitely supported measure on ordered off-diagonal pairs ``(x, y, weight)``."""

    atoms: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        atoms = []
        for a in self.atoms:
            x, y, w = int(a[0]), int(a[1]), float(a[2])
            if x == y:
                raise ValidationError(f"diagonal atom at point {x}")
            if not (w > 0 and math.isfinite(w)):
                raise ValidationError(f"atom ({x}, {y}) has invalid weight {w}")
            atoms.append((x, y, w))
        if not atoms:
            raise ValidationError("pair measure has no atoms")
        object.__setattr__(self, "atoms", tuple(atoms))

    def __len__(self):
        return len(self.atoms)

    @property
    def xs(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms], dtype=int)

    @property
    def ys(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms], dtype=int)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a[2] for a in self.atoms], dtype=float)

    def support(self) -> list[int]:
        return sorted({p for a in self.atoms for p in a[:2]})

    def check_host(self, space: FiniteMetricSpace) -> None:
        for x, y, _ in self.atoms:
            if not (0 <= x < space.n and 0 <= y < space.n):
                raise ValidationError(f"atom ({x}, {y}) references a point outside the host space")

    def reindex(self, mapping: dict[int, int]) -> "PairMeasure":
        return PairMeasure(tuple((mapping[x], mapping[y], w) for x, y, w in self.atoms))

    def scaled(self, factor: float) -> "PairMeasure":
        return PairMeasure(tuple((x, y, w * factor) for x, y, w in self.atoms))

    @classmethod
    def uniform(cls, pairs: Iterable[tuple[int, int]], weight: float = 1.0) -> "PairMeasure":
        return cls(tuple((x, y, weight) for x, y in pairs))


def var_of_curve(space: FiniteMetricSpace, curve: StepCurve) -> float:
    curve.check_host(space)
    p = curve.points
    return math.fsum(space.dist[p[i - 1], p[i]] for i in range(1, len(p)))


def pair_variation(space: FiniteMetricSpace, mu: PairMeasure) -> float:
    """``sum_i w_i * rho(x_i, y_i)``."""
    mu.check_host(space)
    return math.fsum(w * space.dist[x, y] for x, y, w in mu.atoms)


def pair_score(mu: PairMeasure, f) -> float:
    """``sum_i w_i |f(x_i) - f(y_i)|`` for a tabulated function ``f``."""
    f = np.asarray(f, dtype=float)
    return math.fsum(w * abs(f[x] - f[y]) for x, y, w in mu.atoms)


def _dedupe(points: Sequence[int]) -> list[int]:
    out = [points[0]]
    for p in points[1:]:
        if p != out[-1]:
            out.append(p)
    return out


def pairs_from_curve(curve: StepCurve) -> PairMeasure:
    pts = _dedupe(curve.points)
    if len(pts) < 2:
        raise ValidationError("curve never moves; its pair measure would be empty")
    return PairMeasure(tuple((pts[i - 1], pts[i], 1.0) for i in range(1, len(pts))))


def curve_from_pairs(mu: PairMeasure, K: int) -> StepCurve:
    """Curve jumping x_i -> y_i and back 2K times per atom, then moving on to x_{i+1}."""
    if K < 1:
        raise ValidationError("K must be at least 1")
    if any(w != 1.0 for _, _, w in mu.atoms):
        raise ValidationError("curve_from_pairs needs unit weights; rescale at the measure level")
    pts: list[int] = []
    for x, y, _ in mu.atoms:
        pts.append(x)
        pts.extend([y, x] * K)
    return StepCurve(tuple(pts))


def scale_space(space: FiniteMetricSpace, lam: float) -> FiniteMetricSpace:
    """Dilation: every distance (and coordinate, when present) multiplied by ``lam``."""
    if not lam > 0:
        raise ValidationError("dilation factor must be positive")
    coords = space.coords * lam if space.coords is not None else None
    graph = None
    if space.graph is not None:
        graph = dict(space.graph, scale=space.graph["scale"] * lam)
    return FiniteMetricSpace(space.labels, space.dist * lam, coords=coords, graph=graph)


def concatenate_curves(curves: Sequence[StepCurve]) -> StepCurve:
    if not curves:
        raise ValidationError("nothing to concatenate")
    pts: list[int] = []
    for c in curves:
        pts.extend(c.points)
    return StepCurve(tuple(pts))
