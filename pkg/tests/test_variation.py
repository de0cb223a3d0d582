import numpy as np
import pytest

from lcjlab.errors import ValidationError
from lcjlab.generators import sphere_antipodal_sample, staircase_curve
from lcjlab.lipschitz import lvar_exact
from lcjlab.martingale import tree_instance
from lcjlab.metric import FiniteMetricSpace, from_euclidean
from lcjlab.variation import (PairMeasure, StepCurve, concatenate_curves, curve_from_pairs, pair_variation,
                              pairs_from_curve, scale_space, var_of_curve)

import oracles


@pytest.fixture
def square():
    return from_euclidean([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class TestVar:
    def test_constant_curve(self, square):
        assert var_of_curve(square, StepCurve((2,))) == 0
        assert var_of_curve(square, StepCurve((2, 2, 2))) == 0

    def test_staircase(self):
        for d in (1, 3, 8):
            space, curve = staircase_curve(d)
            assert var_of_curve(space, curve) == d

    def test_alternating(self, square):
        K = 5
        curve = StepCurve(tuple([0, 2] * K + [0]))
        assert var_of_curve(square, curve) == pytest.approx(2 * K * np.sqrt(2))

    def test_curve_outside_host(self, square):
        with pytest.raises(ValidationError):
            var_of_curve(square, StepCurve((0, 9)))


class TestPairMeasure:
    def test_validation(self):
        with pytest.raises(ValidationError, match="diagonal"):
            PairMeasure(((0, 0, 1.0),))
        with pytest.raises(ValidationError, match="weight"):
            PairMeasure(((0, 1, 0.0),))
        with pytest.raises(ValidationError, match="no atoms"):
            PairMeasure(())

    def test_single_atom(self, square):
        assert pair_variation(square, PairMeasure(((0, 2, 1.0),))) == pytest.approx(np.sqrt(2))

    def test_sphere_sample_has_variation_two(self):
        pairs = sphere_antipodal_sample(7, 9, seed=3)
        space = from_euclidean([p for pair in pairs for p in pair])
        mu = PairMeasure(tuple((2 * i, 2 * i + 1, 1 / 9) for i in range(9)))
        assert pair_variation(space, mu) == pytest.approx(2, abs=1e-12)

    def test_tree_measure_mass(self):
        inst = tree_instance(2)
        assert pair_variation(inst.space, inst.measure) == pytest.approx((inst.levels - 1) / 2, abs=1e-12)


class TestConversions:
    def test_pairs_from_curve(self, square):
        assert len(pairs_from_curve(StepCurve((0, 1)))) == 1
        space, curve = staircase_curve(5)
        mu = pairs_from_curve(curve)
        assert len(mu) == 5 and all(w == 1 for *_, w in mu.atoms)
        with pytest.raises(ValidationError, match="never moves"):
            pairs_from_curve(StepCurve((1, 1, 1)))

    def test_pairs_preserve_variation(self, square, rng):
        for _ in range(50):
            curve = StepCurve(tuple(rng.integers(0, 4, size=int(rng.integers(2, 12)))))
            if len(set(curve.points)) < 2:
                continue
            assert pair_variation(square, pairs_from_curve(curve)) == pytest.approx(var_of_curve(square, curve))

    def test_curve_from_pairs(self, square):
        one = curve_from_pairs(PairMeasure(((0, 2, 1.0),)), 1)
        assert one.points == (0, 2, 0)
        mu = PairMeasure(((0, 1, 1.0), (2, 3, 1.0)))
        c = curve_from_pairs(mu, 2)
        assert var_of_curve(square, c) >= 4 * pair_variation(square, mu) - 1e-12
        with pytest.raises(ValidationError):
            curve_from_pairs(mu, 0)
        with pytest.raises(ValidationError, match="unit weights"):
            curve_from_pairs(PairMeasure(((0, 1, 0.5),)), 1)

    def test_curve_ratio_approaches_pair_ratio(self, square):
        # crossing diagonals; the transfer legs between atoms are diluted as K grows
        mu = PairMeasure(((0, 2, 1.0), (1, 3, 1.0)))
        target = lvar_exact(square, mu).value / pair_variation(square, mu)
        assert target == pytest.approx(1 / np.sqrt(2), abs=1e-12)
        gaps = []
        for K in (1, 2, 3, 4):
            curve = curve_from_pairs(mu, K)
            pm = pairs_from_curve(curve)
            gaps.append(lvar_exact(square, pm).value / var_of_curve(square, curve) - target)
        assert all(g >= -1e-12 for g in gaps)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.02

    def test_scale_space(self, square):
        mu = PairMeasure(((0, 2, 1.0), (1, 3, 2.0)))
        assert np.array_equal(scale_space(square, 1.0).dist, square.dist)
        doubled = scale_space(square, 2.0)
        assert pair_variation(doubled, mu) == pytest.approx(2 * pair_variation(square, mu))
        assert lvar_exact(doubled, mu).value == pytest.approx(2 * lvar_exact(square, mu).value)
        with pytest.raises(ValidationError):
            scale_space(square, 0)

    def test_scaled_lvar_matches_oracle(self, rng):
        d = oracles.random_metric(rng, 4)
        s = FiniteMetricSpace(tuple("abcd"), d)
        atoms = [(0, 1, 1), (2, 3, 2), (1, 2, 1)]
        mu = PairMeasure(tuple((x, y, float(m)) for x, y, m in atoms))
        for lam in (0.5, 3.0):
            assert lvar_exact(scale_space(s, lam), mu).value == pytest.approx(oracles.brute_lvar(d * lam, atoms), rel=1e-12)

    def test_concatenate(self, square, rng):
        c = StepCurve((0, 1, 2))
        assert concatenate_curves([c]) == c
        c2 = StepCurve((2, 3, 0))
        assert var_of_curve(square, concatenate_curves([c, c2])) == pytest.approx(
            var_of_curve(square, c) + var_of_curve(square, c2))
        parts = [StepCurve(tuple(rng.integers(0, 4, size=4))) for _ in range(3)]
        joined = concatenate_curves(parts)
        pts = [p for part in parts for p in part.points]
        assert var_of_curve(square, joined) == pytest.approx(sum(square.dist[a, b] for a, b in zip(pts, pts[1:])))
        with pytest.raises(ValidationError):
            concatenate_curves([])
