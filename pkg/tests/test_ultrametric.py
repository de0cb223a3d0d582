import itertools

import numpy as np
import pytest

from lcjlab.errors import CapExceededError, ValidationError
from lcjlab.generators import cantor_space, tree_leaf_spectrum, tree_leaves_ultrametric
from lcjlab.lipschitz import lcj_ratio
from lcjlab.metric import FiniteMetricSpace, from_euclidean
from lcjlab.ultrametric import (ball_hierarchy, certificate_from_spectrum, default_depth, expected_gap,
                                lcj_lower_certificate, phi_expectation_exact, sample_phi, sample_phi_batch,
                                separation_scale)
from lcjlab.variation import PairMeasure

import oracles


def two_points(r=1.0):
    return FiniteMetricSpace(("a", "b"), [[0, r], [r, 0]])


class TestHierarchy:
    def test_blocks_are_prefix_classes(self):
        q = 0.2
        space, _ = cantor_space(3, 4, q)
        hier = ball_hierarchy(space, q)
        assert hier.D == 4
        for n in range(1, hier.D + 1):
            for i, j in itertools.combinations(range(space.n), 2):
                same = space.labels[i][:n] == space.labels[j][:n]
                assert (hier.blocks[n - 1][i] == hier.blocks[n - 1][j]) == same
            assert hier.n_blocks(n) == 3 ** n

    def test_refinement_and_centers(self):
        space, _ = cantor_space(2, 5, 0.3)
        hier = ball_hierarchy(space, 0.3)
        for n in range(2, hier.D + 1):
            fine, coarse = hier.blocks[n - 1], hier.blocks[n - 2]
            for b in range(hier.n_blocks(n)):
                assert len(set(coarse[fine == b])) == 1
            for b, c in enumerate(hier.centers[n - 1]):
                members = np.flatnonzero(fine == b)
                assert space.labels[c] == min(space.labels[i] for i in members)

    def test_two_points(self):
        hier = ball_hierarchy(two_points(), 0.2)
        assert hier.D == 1 and hier.n0(0, 1) == 1
        assert phi_expectation_exact(hier, 0, 1) == pytest.approx(0.1)
        cert = lcj_lower_certificate(two_points())
        assert cert.c_star == pytest.approx(0.08) and cert.worst_pair == ("a", "b")
        assert cert.C_q == pytest.approx(1.25) and cert.c_star_loose == pytest.approx(0.04)

    def test_rejects(self):
        with pytest.raises(ValidationError, match="not an ultrametric"):
            ball_hierarchy(from_euclidean([[0.0], [1.0], [2.0]]))
        with pytest.raises(ValidationError):
            ball_hierarchy(FiniteMetricSpace(("a",), [[0.0]]))
        with pytest.raises(ValidationError):
            ball_hierarchy(two_points(), q=1.0)
        # a distance exactly q**n would fall inside a block it must be separated from
        s = FiniteMetricSpace(("a", "b", "c"), [[0, 0.5, 1], [0.5, 0, 1], [1, 1, 0]])
        assert ball_hierarchy(s, 0.5, D=2).n_blocks(1) == 2

    def test_depth_helpers(self):
        assert default_depth(1.0, 0.2) == 1
        assert default_depth(0.2, 0.2) == 2
        assert separation_scale([1.0, 0.2, 0.04], 0.2, 3).tolist() == [1, 2, 3]
        assert separation_scale([0.001], 0.2, 3).tolist() == [0]


class TestPhi:
    def test_depth_one_values(self):
        hier = ball_hierarchy(two_points(), 0.2)
        for seed in range(20):
            assert set(sample_phi(hier, seed).values.tolist()) <= {0.0, 0.2}

    def test_deterministic(self):
        hier = ball_hierarchy(cantor_space(2, 4, 0.2)[0])
        a, b = sample_phi(hier, 11), sample_phi(hier, 11)
        assert np.array_equal(a.values, b.values)
        assert all(np.array_equal(x, y) for x, y in zip(a.eps, b.eps))

    def test_lipschitz_constant(self, rng):
        space, _ = cantor_space(3, 4, 0.2)
        hier = ball_hierarchy(space)
        for phi in sample_phi_batch(hier, rng, 50):
            assert oracles.max_slope(space.dist, phi) <= hier.C + 1e-12

    def test_monte_carlo_matches_exact(self, rng):
        space, _ = cantor_space(2, 5, 0.2)
        hier = ball_hierarchy(space)
        phis = sample_phi_batch(hier, rng, 40000)
        for i, j in [(0, 1), (0, 31), (3, 9)]:
            mc = np.abs(phis[:, i] - phis[:, j])
            exact = phi_expectation_exact(hier, i, j)
            assert abs(mc.mean() - exact) < 5 * mc.std() / np.sqrt(len(mc))
            assert exact == phi_expectation_exact(hier, j, i)


class TestExpectedGap:
    @pytest.mark.parametrize("q", [0.1, 0.2, 0.3])
    def test_closed_form(self, q):
        for n0 in (1, 2, 3):
            for D in range(n0, n0 + 6):
                assert expected_gap(n0, D, q) == pytest.approx(oracles.phi_gap_closed_form(n0, D, q), rel=1e-12)

    @pytest.mark.parametrize("q", [0.2, 0.45, 0.7])
    def test_enumeration(self, q):
        for n0 in (1, 2):
            for D in range(n0, n0 + 6):
                assert expected_gap(n0, D, q) == pytest.approx(oracles.phi_gap_enumerated(n0, D, q), rel=1e-12)

    def test_cap_and_range(self):
        with pytest.raises(CapExceededError):
            expected_gap(1, 30, 0.2)
        with pytest.raises(ValidationError):
            expected_gap(3, 2, 0.2)


class TestCertificate:
    def test_cantor(self):
        for q in (0.2, 0.3):
            cert = lcj_lower_certificate(cantor_space(2, 4, q)[0], q)
            assert 0 < cert.c_star <= 1 / cert.C_q
            assert cert.c_star == pytest.approx(min(expected_gap(n, 4, q) / (q ** (n - 1) / (1 - q))
                                                    for n in range(1, 5)), rel=1e-12)

    def test_rescaled_tree_leaves_match_cantor(self):
        q, N = 0.2, 4
        leaves = tree_leaves_ultrametric(N)
        rescaled = FiniteMetricSpace(leaves.labels, np.where(leaves.dist > 0, q ** (N - leaves.dist), 0.0))
        cantor, _ = cantor_space(2, N, q)
        assert lcj_lower_certificate(rescaled, q).c_star == pytest.approx(lcj_lower_certificate(cantor, q).c_star)

    def test_spectrum_matches_dense(self):
        for N in (2, 4, 6):
            dense = tree_leaves_ultrametric(N)
            scaled = FiniteMetricSpace(dense.labels, dense.dist / N)
            vals, pairs = tree_leaf_spectrum(N)
            labels = [(dense.labels[a], dense.labels[b]) for a, b in pairs]
            spec = certificate_from_spectrum(vals / N, pair_labels=labels)
            full = lcj_lower_certificate(scaled)
            assert spec.c_star == pytest.approx(full.c_star, rel=1e-12)
            assert scaled.dist[scaled.index(spec.worst_pair[0]), scaled.index(spec.worst_pair[1])] == \
                scaled.dist[scaled.index(full.worst_pair[0]), scaled.index(full.worst_pair[1])]

    def test_candidate_ratio_beats_certificate(self, rng):
        space, _ = cantor_space(2, 4, 0.2)
        cert = lcj_lower_certificate(space)
        for _ in range(5):
            pairs = []
            while len(pairs) < 4:
                x, y = rng.choice(space.n, size=2, replace=False)
                pairs.append((int(x), int(y), 1.0))
            ratio, _ = lcj_ratio(space, PairMeasure(tuple(pairs)), "candidates", families=("ultrametric_phi",),
                                 samples=200, seed=int(rng.integers(1000)))
            assert ratio >= cert.c_star - 1e-12
            exact, _ = lcj_ratio(space, PairMeasure(tuple(pairs)))
            assert exact >= ratio - 1e-12

    def test_json(self):
        js = lcj_lower_certificate(two_points()).to_json()
        assert js["worst_pair"] == ["a", "b"] and js["depth"] == 1 and js["C_q_loose"] == pytest.approx(2.5)
