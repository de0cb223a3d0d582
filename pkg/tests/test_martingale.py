import math
from fractions import Fraction

import numpy as np
import pytest

from lcjlab.errors import CapExceededError, PropertyCheckError, ValidationError
from lcjlab.martingale import (Filtration, MartingaleSeq, check_orthogonality, condition42_check, dyadic_filtration,
                               dyadic_martingale, laakso_edge_martingale, laakso_instance, laakso_path_martingale,
                               proposition_chain, random_grid_lipschitz, sixpoint_inequality_check, sixpoint_lhs,
                               sqrtN_inequality_check, tree_instance, tree_martingale)
from lcjlab.metric import random_lipschitz

import oracles


def grid(N):
    return np.arange(2 ** N + 1) / 2 ** N


class TestDyadic:
    def test_identity_is_constant(self):
        M = dyadic_martingale(grid(4), 4)
        assert all(np.all(v == 1) for v in M.values)
        assert all(np.all(M.diff(n) == 0) for n in range(1, 5))

    def test_tent(self):
        M = dyadic_martingale(np.abs(grid(3) - 0.5), 3)
        assert M.values[0].tolist() == [0.0]
        assert M.values[1].tolist() == [-1.0, 1.0]
        assert M.diff(1).tolist() == [-1.0, 1.0]
        assert M.check() == 0

    def test_random_is_exact_martingale(self, rng):
        for N in (1, 3, 6):
            M = dyadic_martingale(random_grid_lipschitz(N, rng), N)
            assert M.check() == 0
            assert M.sup_norm() <= 1
            rep = check_orthogonality(M)
            assert rep.passed and rep.max_abs == 0
            lhs, rhs, ok = sqrtN_inequality_check(M)
            assert ok and lhs <= rhs

    def test_corrupted_values_are_caught(self, rng):
        M = dyadic_martingale(random_grid_lipschitz(3, rng), 3)
        vals = [v.copy() for v in M.values]
        vals[2][1] += 0.25
        with pytest.raises(PropertyCheckError, match=r"\(1, 1\)"):
            MartingaleSeq(M.filtration, vals).check()

    def test_grid_shape(self):
        with pytest.raises(ValidationError):
            dyadic_martingale(np.zeros(5), 3)

    def test_filtration_validation(self):
        F = dyadic_filtration(2)
        with pytest.raises(ValidationError, match="sum to"):
            Filtration([[0], [0, 1]], [[Fraction(1)], [Fraction(1, 2), Fraction(1, 3)]], [None, np.array([0, 0])])
        with pytest.raises(ValidationError, match="equal probability"):
            Filtration([[0], [0, 1]], [[Fraction(1)], [Fraction(1, 4), Fraction(3, 4)]], [None, np.array([0, 0])])
        with pytest.raises(ValidationError, match="parent"):
            Filtration(F.ids, F.probs, [None, np.array([0, 0]), np.array([0, 0, 0, 0])])


class TestTree:
    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_geometry_matches_oracle(self, N):
        inst = tree_instance(N)
        geo = oracles.tree_atom_geometry(N)
        idx = inst.spec.index
        for k, level in enumerate(inst.filtration.ids):
            for i, key in enumerate(level):
                v, vp, _ = geo[key]
                assert inst.v[k][i] == idx(*v) and inst.vp[k][i] == idx(*vp)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_pairs_and_mass(self, N):
        inst = tree_instance(N)
        geo = oracles.tree_atom_geometry(N)
        c = inst.paired.c
        assert c == Fraction(1, 2 ** (2 ** N + N))
        for g in inst.paired.groups:
            k = g.level
            assert len(g.left) == len(g.right) > 0
            P = inst.filtration.probs[k][g.left[0]]
            for a, b in zip(g.left, g.right):
                ka, kb = inst.filtration.ids[k][a], inst.filtration.ids[k][b]
                assert geo[ka][2] == geo[kb][2]
                rho = oracles.dyadic_tree_distance(geo[ka][1], geo[kb][1])
                assert rho == 2 ** (N - k)
                assert c * rho == P
        assert inst.mass == Fraction(N, 2)
        assert inst.levels == N + 1

    def test_depth_function_gives_constant_martingale(self):
        inst = tree_instance(2)
        depth = inst.space.dist[0]
        M = tree_martingale(inst, depth)
        assert all(np.all(v == -1) for v in M.values)
        assert M.check() == 0

    def test_constant_function_is_vacuous(self):
        inst = tree_instance(2)
        assert condition42_check(inst, np.zeros(inst.space.n)) == math.inf

    def test_condition_and_chain_on_random_functions(self, rng):
        inst = tree_instance(2)
        for _ in range(10):
            f = random_lipschitz(inst.space, rng)
            assert condition42_check(inst, f) >= 1 - 1e-9
            rep = proposition_chain(inst, f)
            assert rep.holds()
            assert rep.ratio <= rep.certified_ratio

    def test_instance_range(self):
        with pytest.raises(CapExceededError):
            tree_instance(4)


class TestLaakso:
    @pytest.mark.parametrize("N", [1, 2])
    def test_traversal_matches_path_enumeration(self, N):
        inst = laakso_instance(N)
        for k in range(N + 1):
            ref = oracles.laakso_traversal_by_enumeration(inst.stage, k)
            got = {e: p for e, p in inst.edge_prob[k].items()}
            assert got == ref

    def test_constants(self):
        for N in (1, 2, 3):
            inst = laakso_instance(N)
            assert inst.path_count == math.prod(2 ** 4 ** k for k in range(N))
            assert inst.mass == Fraction(N, 2)
            assert inst.kappa == 4

    @pytest.mark.parametrize("N", [1, 2])
    def test_edge_and_path_increments_agree(self, N, rng):
        inst = laakso_instance(N)
        for _ in range(3):
            f = random_lipschitz(inst.space, rng).values
            E = laakso_edge_martingale(inst, f)
            P, _ = laakso_path_martingale(inst, f)
            assert E.check() < 1e-10 and P.check() < 1e-10
            for n in range(1, N + 1):
                assert E.expectation(np.abs(E.diff(n)), n) == pytest.approx(P.expectation(np.abs(P.diff(n)), n), rel=1e-12)
            assert E.sup_norm() == pytest.approx(P.sup_norm(), rel=1e-12)

    def test_condition_through_path_filtration(self, rng):
        inst = laakso_instance(2)
        for _ in range(5):
            f = random_lipschitz(inst.space, rng).values
            P, edges = laakso_path_martingale(inst, f)
            worst = math.inf
            for r in inst.refinements:
                k = r.level
                mass = P.increment_mass(k)
                on_edge = [i for i, e in enumerate(edges[k]) if e == (r.A, r.D)]
                gap = abs(f[r.P] - f[r.Q])
                if gap > 1e-12:
                    worst = min(worst, mass[on_edge].sum() / (float(inst.edge_prob[k][(r.A, r.D)]) * gap))
            assert condition42_check(inst, f) == pytest.approx(worst, rel=1e-9)
            assert worst >= 1 - 1e-9

    def test_chain(self, rng):
        inst = laakso_instance(3)
        for _ in range(5):
            assert proposition_chain(inst, random_lipschitz(inst.space, rng)).holds()

    def test_path_filtration_cap(self):
        with pytest.raises(CapExceededError):
            laakso_path_martingale(laakso_instance(3), np.zeros(laakso_instance(3).space.n))


class TestSixPoint:
    def test_lhs_matches_oracle(self, rng):
        for _ in range(50):
            X = rng.standard_normal(6)
            assert sixpoint_lhs(*X) / abs(X[4] - X[5]) == pytest.approx(oracles.sixpoint_ratio(*X), rel=1e-12)

    def test_tight_configuration(self):
        # affine along the outer path, P and Q straddling the midpoint
        assert oracles.sixpoint_ratio(0.0, 1.0, 3.0, 4.0, 2.1, 1.9) == pytest.approx(8.0)

    def test_perturbations_stay_above_one(self, rng):
        base = np.array([0.0, 1.0, 3.0, 4.0, 2.1, 1.9])
        for _ in range(500):
            X = base + rng.standard_normal(6) * 10.0 ** rng.uniform(-6, 0)
            assert oracles.sixpoint_ratio(*X) >= 1

    def test_randomized_check(self):
        worst, ok = sixpoint_inequality_check(20000, seed=7)
        assert ok and worst >= 1
