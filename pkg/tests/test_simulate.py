"""Simulator: statistical validity, determinism, and degree scenarios."""

import numpy as np
import pytest
from scipy.stats import chisquare

from streamblocks import (
    EdgeList,
    HomHawkesParams,
    HomPoissonParams,
    InputError,
    StepBasis,
)
from streamblocks.params import InhomPoissonParams
from streamblocks.simulate import (
    EvenDegrees,
    UnevenDegrees,
    sample_dense_nodes,
    sample_edge_list,
    sample_memberships,
    simulate,
)


class TestMemberships:
    def test_proportions_within_three_sigma(self):
        m, pi = 100, np.array([0.4, 0.3, 0.3])
        z = sample_memberships(m, pi, seed=0)
        counts = np.bincount(z, minlength=3)
        for k in range(3):
            sigma = np.sqrt(m * pi[k] * (1 - pi[k]))
            assert abs(counts[k] - m * pi[k]) <= 3 * sigma

    def test_degenerate_simplex(self):
        z = sample_memberships(50, [1.0, 0.0, 0.0], seed=1)
        assert np.all(z == 0)

    def test_chi_square_goodness_of_fit(self):
        m = 10_000
        z = sample_memberships(m, [0.5, 0.5], seed=2)
        counts = np.bincount(z, minlength=2)
        _, p = chisquare(counts, [m / 2, m / 2])
        assert p > 0.001

    def test_bad_simplex_rejected(self):
        with pytest.raises(InputError, match="simplex"):
            sample_memberships(10, [0.5, 0.6], seed=0)

    def test_deterministic(self):
        a = sample_memberships(200, [0.3, 0.7], seed=9)
        b = sample_memberships(200, [0.3, 0.7], seed=9)
        np.testing.assert_array_equal(a, b)


class TestEdgeList:
    def test_even_degrees_exact(self):
        edges = sample_edge_list(100, EvenDegrees(40), seed=3)
        assert edges.n_pairs == 4000
        out_deg = np.bincount(edges.src, minlength=100)
        assert np.all(out_deg == 40)
        assert np.all(edges.src != edges.dst)

    def test_two_node_forced(self):
        edges = sample_edge_list(2, EvenDegrees(1), seed=0)
        assert sorted(edges.pairs()) == [(0, 1), (1, 0)]

    def test_uneven_exactly_dense_count(self):
        m = 1000
        scenario = UnevenDegrees(N_u=100)
        edges = sample_edge_list(m, scenario, seed=4)
        d_dense, d_sparse = scenario.resolve(m)
        out_deg = np.bincount(edges.src, minlength=m)
        assert int(np.sum(out_deg > d_sparse)) == 100
        dense = sample_dense_nodes(m, scenario, seed=4)
        assert np.all(out_deg[dense] == d_dense)

    def test_degree_too_large_rejected(self):
        with pytest.raises(InputError, match="out-degree"):
            sample_edge_list(5, EvenDegrees(5), seed=0)


SINGLE_PAIR = EdgeList.from_pairs([(0, 1)], m=2)


class TestSimulate:
    def test_poisson_count_within_four_sigma(self):
        p = HomPoissonParams([[0.6]])
        ev = simulate(p, SINGLE_PAIR, [0, 0], T=500.0, seed=5)
        lam = 0.6 * 500
        assert abs(len(ev) - lam) <= 4 * np.sqrt(lam)

    def test_zero_horizon_empty(self):
        p = HomPoissonParams([[0.6]])
        assert len(simulate(p, SINGLE_PAIR, [0, 0], T=0.0, seed=5)) == 0

    def test_hawkes_long_run_rate(self):
        # stationary mean of a subcritical self-exciting process
        p = HomHawkesParams([[0.5]], [[0.5]], 1.0)
        ev = simulate(p, SINGLE_PAIR, [0, 0], T=10_000.0, seed=6)
        rate = len(ev) / 10_000.0
        assert rate == pytest.approx(0.5 / (1 - 0.5), rel=0.03)

    def test_supercritical_rejected(self):
        p = HomHawkesParams([[0.5]], [[1.0]], 1.0)
        with pytest.raises(InputError, match="non-stationary"):
            simulate(p, SINGLE_PAIR, [0, 0], T=10.0, seed=0)

    def test_byte_for_byte_determinism(self):
        p = HomHawkesParams([[0.5, 0.2], [0.3, 0.6]], [[0.4, 0.2], [0.1, 0.3]], 1.0)
        edges = sample_edge_list(10, EvenDegrees(3), seed=8)
        z = sample_memberships(10, [0.5, 0.5], seed=8)
        a = simulate(p, edges, z, T=50.0, seed=8)
        b = simulate(p, edges, z, T=50.0, seed=8)
        assert a.t.tobytes() == b.t.tobytes()
        assert a.src.tobytes() == b.src.tobytes()
        assert a.dst.tobytes() == b.dst.tobytes()

    def test_merged_output_sorted(self):
        p = HomPoissonParams(np.full((2, 2), 0.5))
        edges = sample_edge_list(20, EvenDegrees(4), seed=10)
        z = sample_memberships(20, [0.4, 0.6], seed=10)
        ev = simulate(p, edges, z, T=30.0, seed=10)
        assert np.all(np.diff(ev.t) >= 0)
        assert np.all(edges.contains(ev.src, ev.dst))

    def test_inhom_poisson_per_bin_counts(self):
        # thinning correctness: per-step-bucket counts within 4 sigma
        basis = StepBasis(H=3, period=2.0)
        coefs = np.zeros((1, 1, 3))
        coefs[0, 0] = [0.9, 0.3, 0.6]
        p = InhomPoissonParams(coefs, basis)
        T = 1200.0
        ev = simulate(p, SINGLE_PAIR, [0, 0], T=T, seed=11)
        h = basis.active_index(ev.t)
        meas = basis.segment_measures(0.0, T)
        for hh in range(3):
            lam = coefs[0, 0, hh] * meas[hh]
            got = int(np.sum(h == hh))
            assert abs(got - lam) <= 4 * np.sqrt(lam)

    def test_hawkes_rate_convergence_across_horizons(self):
        # law of large numbers: longer horizons concentrate on mu/(1-b)
        p = HomHawkesParams([[0.4]], [[0.4]], 1.2)
        target = 0.4 / (1 - 0.4)
        errs = []
        for T in (500.0, 8000.0):
            ev = simulate(p, SINGLE_PAIR, [0, 0], T=T, seed=12)
            errs.append(abs(len(ev) / T - target))
        assert errs[1] < errs[0]
