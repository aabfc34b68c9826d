import math

import numpy as np
import pytest

from phaseshape import (
    AdmissibilityError,
    ChannelParams,
    Constellation,
    LikelihoodKind,
    PairwiseStats,
    QuadratureGrid,
    gap_d_metric,
    make_rng,
    mi_dc,
    mi_dc_best,
    mi_dd,
    metric_record,
    pairwise_error_prob,
    pairwise_stats,
    q_function,
    sample_channel,
    sep_floor,
    sep_union_bound,
    spiral_qam,
    transition_matrix,
)
from phaseshape.metrics import mi_from_transition_probs
from phaseshape.optimize import apsk_realize

from conftest import params_at


class TestPairwiseStats:
    def test_equal_energy_symmetry(self, psk16):
        par = params_at(12.0, 0.01)
        s = pairwise_stats(psk16, 0, 3, par)
        assert s.radial_gap == pytest.approx(0.0, abs=1e-12)
        assert s.variance_ratio == pytest.approx(1.0, rel=1e-12)
        assert s.log_ratio == pytest.approx(0.0, abs=1e-12)
        assert s.mean_diff == pytest.approx(-s.angular_gap, rel=1e-12)
        assert s.var_diff == pytest.approx(4.0 * s.angular_gap, rel=1e-12)

    def test_rejects_same_index_and_origin(self, qam16):
        par = params_at(12.0, 0.01)
        with pytest.raises(ValueError):
            pairwise_stats(qam16, 2, 2, par)
        withzero = Constellation(np.concatenate([[0j], qam16.points[:15]]), 1.0)
        with pytest.raises(AdmissibilityError):
            pairwise_stats(withzero, 0, 1, par)

    def test_moment_identities(self, qam16):
        par = params_at(14.0, 0.05)
        for i, j in ((0, 1), (3, 12), (5, 10)):
            s = pairwise_stats(qam16, i, j, par)
            assert s.mean_diff == pytest.approx(
                1.0 - (s.radial_gap + s.angular_gap + s.variance_ratio), rel=1e-12
            )
            c = s.variance_ratio
            assert s.var_diff == pytest.approx(
                2 + 4 * s.radial_gap + 2 * c * c + 4 * s.angular_gap * c - 4 * c, rel=1e-12
            )
            assert s.var_diff >= 0.0

    def test_moments_against_surrogate_draws(self, qam16):
        # under the high-SNR statistics the moment formulas are exact;
        # eta includes the deterministic log shift, hence mean + log_ratio
        par = params_at(18.0, 0.01)
        i, j = 15, 11  # a corner and an edge symbol
        s = pairwise_stats(qam16, i, j, par)
        n = 1_000_000
        rng = make_rng(99)
        mags, angs = qam16.magnitudes(), qam16.angles()
        v_phi = par.sigma_p2 + par.n0 / (2 * mags[i] ** 2)
        rho = rng.normal(mags[i], math.sqrt(par.n0 / 2), n)
        phi = rng.normal(angs[i], math.sqrt(v_phi), n)
        r = rho * np.exp(1j * phi)
        eta = gap_d_metric(r, complex(qam16.points[i]), par) - gap_d_metric(
            r, complex(qam16.points[j]), par
        )
        se_mean = eta.std(ddof=1) / math.sqrt(n)
        assert eta.mean() == pytest.approx(s.mean_diff + s.log_ratio, abs=3 * se_mean)
        var_hat = eta.var(ddof=1)
        se_var = math.sqrt(2.0 / n) * var_hat
        assert var_hat == pytest.approx(s.var_diff, abs=3 * se_var)

    def test_moments_against_true_channel(self, qam16):
        # the true channel only obeys the formulas to linearization accuracy
        par = params_at(18.0, 0.01)
        i, j = 15, 11
        s = pairwise_stats(qam16, i, j, par)
        n = 500_000
        rng = make_rng(100)
        r = sample_channel(np.full(n, qam16.points[i]), par, rng)
        eta = gap_d_metric(r, complex(qam16.points[i]), par) - gap_d_metric(
            r, complex(qam16.points[j]), par
        )
        assert eta.mean() == pytest.approx(s.mean_diff + s.log_ratio, rel=0.02)
        assert eta.var(ddof=1) == pytest.approx(s.var_diff, rel=0.10)


class TestPairwiseErrorProb:
    def test_balanced_pair_is_half(self):
        s = PairwiseStats(0.0, 1.0, 1.0, -2.0, -2.0, 4.0)
        assert pairwise_error_prob(s) == pytest.approx(0.5, rel=1e-12)

    def test_three_sigma_value(self):
        # (log_ratio - mean_diff)/sqrt(var_diff) = 3
        s = PairwiseStats(0.0, 0.0, 1.0, 1.0, -2.0, 1.0)
        expected = float(0.5 * math.erfc(3.0 / math.sqrt(2.0)))
        assert expected == pytest.approx(0.0013498980, abs=1e-10)
        assert pairwise_error_prob(s) == pytest.approx(expected, rel=1e-12)

    def test_monotone_in_angular_gap(self):
        a, c, y = 0.3, 1.0, 0.0
        probs = []
        for b in (0.5, 1.0, 2.0, 4.0, 8.0):
            mean = 1 - (a + b + c)
            var = 2 + 4 * a + 2 * c * c + 4 * b * c - 4 * c
            probs.append(pairwise_error_prob(PairwiseStats(a, b, c, y, mean, var)))
        assert all(p1 > p2 for p1, p2 in zip(probs, probs[1:]))

    def test_degenerate_pair_flagged(self):
        s = PairwiseStats(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
        with pytest.warns(RuntimeWarning):
            assert pairwise_error_prob(s) == 0.5

    def test_q_function_underflow_by_design(self):
        assert q_function(40.0) == 0.0
        assert q_function(3.0) == pytest.approx(0.0013498980316300933, rel=1e-12)


class TestSepUnionBound:
    def test_single_point_is_zero(self):
        c = Constellation([1 + 0j], 1.0)
        assert sep_union_bound(c, ChannelParams(0.01, 0.1)).value == 0.0

    def test_monotone_down_to_floor(self, qam16):
        values = [sep_union_bound(qam16, params_at(db, 0.01)).value for db in range(4, 42, 2)]
        assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))

    def test_raw_reported_alongside_clip(self, qam16):
        bound = sep_union_bound(qam16, params_at(-10.0, 0.01))
        assert bound.raw > 1.0
        assert bound.value == 1.0

    def test_matches_pairwise_composition(self, qam16):
        par = params_at(16.0, 0.01)
        manual = sum(
            pairwise_error_prob(pairwise_stats(qam16, i, j, par))
            for i in range(16)
            for j in range(16)
            if i != j
        ) / 16
        assert sep_union_bound(qam16, par).value == pytest.approx(manual, rel=1e-12)

    @pytest.mark.slow
    def test_bound_vs_simulation(self, qam16):
        # tight at high SNR: above the empirical SEP but within 3x of it
        from phaseshape import DetectorKind, empirical_sep

        par = params_at(20.0, 0.01)
        bound = sep_union_bound(qam16, par).value
        rep = empirical_sep(qam16, par, DetectorKind.GAP_D, 10_000_000, seed=7)
        assert bound >= rep.estimate - 3 * rep.std_error
        assert bound <= 3.0 * (rep.estimate + 3 * rep.std_error)


class TestSepFloor:
    def test_psk_table_value(self, psk16):
        floor = sep_floor(psk16, 0.01)
        assert floor == pytest.approx(0.0498, rel=0.05)

    def test_qam_table_value(self, qam16):
        floor = sep_floor(qam16, 0.01)
        assert 3.5e-4 / 1.3 <= floor <= 3.5e-4 * 1.3

    def test_distinct_magnitudes_have_no_floor(self):
        assert sep_floor(spiral_qam(16), 0.01) == 0.0

    def test_floor_is_high_snr_limit_of_bound(self, psk16):
        bound = sep_union_bound(psk16, params_at(60.0, 0.01)).value
        floor = sep_floor(psk16, 0.01)
        assert bound == pytest.approx(floor, rel=0.10)

    def test_paper_literal_flag_differs(self, psk16):
        literal = sep_floor(psk16, 0.01, paper_literal=True)
        assert abs(literal / sep_floor(psk16, 0.01) - 1.0) > 0.05

    def test_rejects_zero_variance(self, psk16):
        with pytest.raises(ValueError):
            sep_floor(psk16, 0.0)


class TestTransitionMatrix:
    def test_near_identity_at_vanishing_noise(self):
        c = spiral_qam(16)  # all magnitudes distinct
        tm = transition_matrix(c, params_at(60.0, 0.01))
        assert np.allclose(tm.probs, np.eye(16), atol=1e-9)
        assert not tm.clamped.any()

    def test_rows_sum_to_one(self, qam16):
        for db in (0.0, 8.0, 16.0, 30.0):
            tm = transition_matrix(qam16, params_at(db, 0.01))
            assert np.allclose(tm.probs.sum(axis=1), 1.0, atol=1e-12)
            assert tm.probs.min() >= 0.0

    def test_low_snr_rows_clamped_and_renormalized(self, qam16):
        tm = transition_matrix(qam16, params_at(-10.0, 0.01))
        assert tm.clamped.any()
        assert np.allclose(tm.probs.sum(axis=1), 1.0, atol=1e-12)

    def test_off_diagonals_are_pairwise_probs(self, qam16):
        par = params_at(16.0, 0.01)
        tm = transition_matrix(qam16, par)
        for i, j in ((0, 1), (7, 2), (15, 14)):
            expected = pairwise_error_prob(pairwise_stats(qam16, i, j, par))
            assert tm.probs[i, j] == pytest.approx(expected, rel=1e-12)


class TestMiDd:
    def test_identity_and_uniform_formulas(self):
        assert mi_from_transition_probs(np.eye(16)) == pytest.approx(4.0, abs=1e-12)
        assert mi_from_transition_probs(np.full((16, 16), 1 / 16)) == pytest.approx(0.0, abs=1e-12)

    def test_saturates_at_high_snr(self):
        c = spiral_qam(16)
        assert mi_dd(c, params_at(60.0, 0.01)) == pytest.approx(4.0, abs=1e-6)

    def test_bounds_and_rotation_invariance(self, qam16):
        for db in (0.0, 10.0, 20.0):
            par = params_at(db, 0.01)
            v = mi_dd(qam16, par)
            assert 0.0 <= v <= 4.0
            assert mi_dd(Constellation(qam16.points * np.exp(0.37j), 1.0), par) == pytest.approx(
                v, abs=1e-9
            )

    def test_permutation_invariance(self, qam16):
        par = params_at(12.0, 0.01)
        perm = Constellation(qam16.points[::-1], 1.0)
        assert mi_dd(perm, par) == pytest.approx(mi_dd(qam16, par), abs=1e-12)

    def test_matches_empirical_transition_mi(self, qam16):
        from phaseshape import DetectorKind, empirical_transition_matrix

        par = params_at(16.0, 0.01)
        tm, _ = empirical_transition_matrix(qam16, par, DetectorKind.GAP_D, 1_000_000, seed=5)
        assert mi_dd(qam16, par) == pytest.approx(mi_from_transition_probs(tm.probs), abs=0.02)


class TestMiDc:
    def test_single_point_is_zero(self):
        c = Constellation([1 + 0j], 1.0)
        par = ChannelParams(0.01, 0.1)
        grid = QuadratureGrid.for_channel(c, par, 32, 32, 8)
        assert mi_dc(c, par, LikelihoodKind.PHN, grid).bits == 0.0

    def test_near_saturation_low_phase_noise(self, qam16):
        par = params_at(20.0, 0.001)
        est = mi_dc(qam16, par, LikelihoodKind.SNR)
        assert est.bits == pytest.approx(4.0, abs=0.05)

    def test_variance_ordering_at_high_snr(self, qam16):
        hi = mi_dc(qam16, params_at(20.0, 0.1), LikelihoodKind.SNR).bits
        lo = mi_dc(qam16, params_at(20.0, 0.001), LikelihoodKind.SNR).bits
        assert hi < lo

    def test_grid_halving_convergence(self, qam16):
        par = params_at(10.0, 0.01)
        grid = QuadratureGrid.for_channel(qam16, par, 256, 512, 32)
        est = mi_dc(qam16, par, LikelihoodKind.PHN, grid)
        doubled = QuadratureGrid.for_channel(qam16, par, 512, 1024, 32)
        est2 = mi_dc(qam16, par, LikelihoodKind.PHN, doubled)
        assert abs(est2.bits - est.bits) <= est.error_estimate + 1e-12

    def test_bounds(self, qam16):
        for db, s2 in ((0.0, 0.1), (10.0, 0.01), (20.0, 0.001)):
            par = params_at(db, s2)
            grid = QuadratureGrid.for_channel(qam16, par, 128, 256, 16)
            for kind in LikelihoodKind:
                v = mi_dc(qam16, par, kind, grid).bits
                assert 0.0 <= v <= 4.0

    def test_origin_point_scored_with_exact_density(self):
        _, c = apsk_realize((1, 5, 5, 5))
        par = params_at(14.0, 0.1)
        grid = QuadratureGrid.for_channel(c, par, 128, 256, 16)
        est = mi_dc(c, par, LikelihoodKind.SNR, grid)
        assert "origin-exact-density" in est.flags
        assert 0.0 < est.bits <= 4.0


class TestMiDcBest:
    def test_low_snr_prefers_phn(self, qam16):
        par = params_at(0.0, 0.01)
        grid = QuadratureGrid.for_channel(qam16, par, 256, 512, 32)
        assert mi_dc_best(qam16, par, grid).kind is LikelihoodKind.PHN

    def test_high_snr_high_variance_prefers_snr(self, qam16):
        par = params_at(20.0, 0.1)
        grid = QuadratureGrid.for_channel(qam16, par, 256, 512, 32)
        assert mi_dc_best(qam16, par, grid).kind is LikelihoodKind.SNR

    def test_returns_the_larger_value(self, qam16):
        par = params_at(6.0, 0.1)
        grid = QuadratureGrid.for_channel(qam16, par, 128, 256, 16)
        best = mi_dc_best(qam16, par, grid)
        both = [mi_dc(qam16, par, k, grid).bits for k in LikelihoodKind]
        assert best.bits == pytest.approx(max(both), abs=1e-12)


class TestQuadratureGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            QuadratureGrid(r_max=1.0, n_r=8, n_phi=64)
        with pytest.raises(ValueError):
            QuadratureGrid(r_max=-1.0)

    def test_for_channel_covers_spread(self, qam16):
        par = params_at(10.0, 0.01)
        grid = QuadratureGrid.for_channel(qam16, par)
        assert grid.r_max >= float(qam16.magnitudes().max()) + 8 * math.sqrt(par.n0 / 2)


def test_metric_record_shape(qam16):
    par = params_at(16.0, 0.01)
    rec = metric_record(qam16, par, "sep-bound", 0.5, None, ["x"])
    assert set(rec) == {
        "constellation_hash",
        "sigma_p2",
        "eb_n0_db",
        "metric",
        "value",
        "error_estimate",
        "flags",
    }
    assert rec["constellation_hash"] == qam16.content_hash()
