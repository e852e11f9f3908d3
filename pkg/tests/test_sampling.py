"""Tests of the phase protocol and exact rejection sampling."""

import numpy as np
import pytest
from scipy.stats import chi2, ks_2samp

from wignet.gaussian import assemble_covariance
from wignet.sampling import (
    DEFAULT_PHASE_INTERVALS,
    EnvelopeFailureError,
    QuadratureBatch,
    default_envelope_scale,
    draw_phase_protocol,
    inject_loss_replacement,
    rejection_sample_marginal,
    sample_joint_quadratures,
    sample_vacuum_quadratures,
)
from wignet.wigner import GAUSSIAN_OP, NonGaussianOp, build_wigner_form, marginal

from test_wigner import random_form


def chi_square_pvalue(samples, marg_1d, n_bins=50):
    """Goodness-of-fit of samples against a 1D analytic marginal.

    Bin probabilities come from dense trapezoid integration of the density;
    bins with expected count below five are merged into their neighbour.
    """
    sigma = np.sqrt(marg_1d.cov[0, 0])
    edges = np.linspace(-8.0 * sigma, 8.0 * sigma, n_bins + 1)
    fine = np.linspace(edges[0], edges[-1], 40_001)
    density = marg_1d.pdf(fine)
    cdf = np.concatenate([[0.0], np.cumsum((density[1:] + density[:-1]) * 0.5 * np.diff(fine))])
    cdf /= cdf[-1]
    probabilities = np.diff(np.interp(edges, fine, cdf))
    counts, _ = np.histogram(np.clip(samples, edges[0], edges[-1]), bins=edges)
    expected = probabilities * samples.size
    merged_counts, merged_expected = [], []
    acc_c, acc_e = 0.0, 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= 5.0:
            merged_counts.append(acc_c)
            merged_expected.append(acc_e)
            acc_c, acc_e = 0.0, 0.0
    if acc_e > 0:
        merged_counts[-1] += acc_c
        merged_expected[-1] += acc_e
    merged_counts = np.array(merged_counts)
    merged_expected = np.array(merged_expected)
    statistic = np.sum((merged_counts - merged_expected) ** 2 / merged_expected)
    return float(chi2.sf(statistic, df=merged_counts.size - 1))


class TestPhaseProtocol:
    def test_point_intervals_give_exact_phases(self, rng):
        intervals = np.array([[0.0, 0.0], [np.pi / 2, np.pi / 2], [np.pi, np.pi]])
        protocol = draw_phase_protocol(1, rng, intervals)
        assert np.array_equal(protocol.phases, np.array([[0.0, np.pi / 2, np.pi]]))

    def test_three_modes_nine_phases_inside_intervals(self, rng):
        protocol = draw_phase_protocol(3, rng)
        assert protocol.phases.shape == (3, 3)
        protocol.validate()
        for slot in range(3):
            lo, hi = DEFAULT_PHASE_INTERVALS[slot]
            assert np.all((protocol.phases[:, slot] >= lo) & (protocol.phases[:, slot] < hi))

    def test_fixed_seed_reproducible(self):
        a = draw_phase_protocol(4, np.random.default_rng(5))
        b = draw_phase_protocol(4, np.random.default_rng(5))
        assert np.array_equal(a.phases, b.phases)


class TestRejectionSampling:
    def test_vacuum_moments(self, rng):
        form = build_wigner_form(np.eye(2), GAUSSIAN_OP)
        marg = marginal(form, [(1, 0.0)])
        samples, acceptance = rejection_sample_marginal(marg, 100_000, rng)
        assert abs(np.mean(samples)) < 3.0 / np.sqrt(100_000)
        assert np.var(samples) == pytest.approx(1.0, rel=0.05)
        assert acceptance > 0.05

    def test_added_vacuum_fourth_moment(self, rng):
        """E[x^2] of the single-photon quadrature equals the Gaussian fourth moment 3."""
        form = build_wigner_form(np.eye(2), NonGaussianOp("add", np.array([1.0, 0.0])))
        marg = marginal(form, [(1, 0.4)])
        samples, _ = rejection_sample_marginal(marg, 100_000, rng)
        assert np.mean(samples**2) == pytest.approx(3.0, rel=0.02)

    def test_chi_square_goodness_of_fit(self, rng):
        for kind in ("none", "add", "subtract"):
            form = random_form(rng, mode_count=2, kind=kind)
            marg = marginal(form, [(1, 0.8)])
            samples, _ = rejection_sample_marginal(marg, 100_000, rng)
            assert chi_square_pvalue(samples.ravel(), marg) > 0.01

    def test_matches_inverse_cdf_sampling(self, rng):
        """Two-sample KS against numeric CDF inversion does not reject at 1%."""
        form = random_form(rng, mode_count=1, kind="subtract")
        marg = marginal(form, [(1, 1.1)])
        rejected, _ = rejection_sample_marginal(marg, 100_000, rng)
        sigma = np.sqrt(marg.cov[0, 0])
        grid = np.linspace(-9 * sigma, 9 * sigma, 200_001)
        density = marg.pdf(grid)
        cdf = np.concatenate([[0.0], np.cumsum((density[1:] + density[:-1]) * 0.5 * np.diff(grid))])
        cdf /= cdf[-1]
        inverse = np.interp(rng.uniform(size=100_000), cdf, grid)
        assert ks_2samp(rejected.ravel(), inverse).pvalue > 0.01

    def test_acceptance_floor_over_corpus_forms(self, rng):
        """Corpus-like forms keep acceptance above 0.05 up to ten modes."""
        for mode_count in (1, 3, 10):
            for kind in ("none", "add"):
                form = random_form(rng, mode_count=mode_count, kind=kind)
                directions = [(j + 1, rng.uniform(0, np.pi)) for j in range(mode_count)]
                marg = marginal(form, directions)
                _, acceptance = rejection_sample_marginal(marg, 2_000, rng)
                assert acceptance > 0.05, (mode_count, kind, acceptance)

    def test_envelope_failure_raised(self, rng):
        form = build_wigner_form(np.eye(2), GAUSSIAN_OP)
        marg = marginal(form, [(1, 0.0)])
        with pytest.raises(EnvelopeFailureError):
            rejection_sample_marginal(marg, 10_000, rng, envelope_scale=1e8, probe_points=100)

    def test_envelope_scale_shrinks_with_dimension(self):
        assert default_envelope_scale(1) == 2.0
        assert default_envelope_scale(6) == pytest.approx(2.0)
        assert default_envelope_scale(10) == pytest.approx(8.0 ** 0.2)


class TestSampleJointQuadratures:
    def test_complete_batch_shape(self, rng):
        form = random_form(rng, mode_count=2, kind="none")
        protocol = draw_phase_protocol(2, rng)
        batch = sample_joint_quadratures(form, protocol, 50, rng, state_id="abc")
        assert len(batch) == 50 * 3 * 2
        assert batch.state_id == "abc"
        assert set(np.unique(batch.mode)) == {1, 2}
        assert set(np.unique(batch.phase_index)) == {1, 2, 3}
        assert set(np.unique(batch.repetition)) == set(range(1, 51))

    def test_phases_match_protocol(self, rng):
        form = random_form(rng, mode_count=2, kind="none")
        protocol = draw_phase_protocol(2, rng)
        batch = sample_joint_quadratures(form, protocol, 10, rng)
        for mode in (1, 2):
            for slot in (1, 2, 3):
                mask = (batch.mode == mode) & (batch.phase_index == slot)
                assert np.all(batch.phase[mask] == protocol.phases[mode - 1, slot - 1])

    def test_per_mode_means_vanish(self, rng):
        """Zero-mean states: each (mode, slot) sample mean is within 4/sqrt(k)."""
        form = random_form(rng, mode_count=3, kind="subtract")
        protocol = draw_phase_protocol(3, rng)
        reps = 4000
        batch = sample_joint_quadratures(form, protocol, reps, rng)
        for mode in (1, 2, 3):
            for slot in (1, 2, 3):
                values = batch.values_for(mode, slot)
                spread = np.std(values)
                assert abs(np.mean(values)) < 4.0 * spread / np.sqrt(reps)

    def test_deterministic_per_seed(self, rng):
        form = random_form(rng, mode_count=2, kind="add")
        protocol = draw_phase_protocol(2, np.random.default_rng(3))
        a = sample_joint_quadratures(form, protocol, 20, np.random.default_rng(9))
        b = sample_joint_quadratures(form, protocol, 20, np.random.default_rng(9))
        assert np.array_equal(a.value, b.value)

    def test_cross_mode_correlations_survive(self, rng):
        """An entangled pair shows correlated joint outcomes within a slot."""
        from wignet.gaussian import GaussianStateSpec
        from wignet.harness import _balanced_beamsplitter, _rotation

        spec = GaussianStateSpec(
            2,
            np.array([1.0, 1.0]),
            np.array([8.0, 8.0]),
            np.eye(4),
            _balanced_beamsplitter(2, 1, 2) @ _rotation(2, 2, np.pi / 2),
            0.0,
        )
        form = build_wigner_form(assemble_covariance(spec), GAUSSIAN_OP)
        intervals = np.zeros((3, 2))  # all phases at 0: x quadratures
        protocol = draw_phase_protocol(2, rng, intervals)
        batch = sample_joint_quadratures(form, protocol, 4000, rng)
        mask = batch.phase_index == 1
        x1 = batch.value[mask & (batch.mode == 1)]
        x2 = batch.value[mask & (batch.mode == 2)]
        assert np.corrcoef(x1, x2)[0, 1] > 0.5


class TestVacuumSampler:
    def test_moments(self, rng):
        draws = sample_vacuum_quadratures(1_000_000, rng)
        assert abs(np.mean(draws)) < 0.005
        assert np.var(draws) == pytest.approx(1.0, rel=0.01)

    def test_empty(self, rng):
        assert sample_vacuum_quadratures(0, rng).size == 0


class TestInjectLossReplacement:
    def make_batch(self, rng, reps=1000, modes=2):
        form = random_form(rng, mode_count=modes, kind="none")
        protocol = draw_phase_protocol(modes, rng)
        return sample_joint_quadratures(form, protocol, reps, rng)

    def test_zero_fraction_unchanged(self, rng):
        batch = self.make_batch(rng, reps=50)
        out = inject_loss_replacement(batch, 0.0, rng)
        assert np.array_equal(out.value, batch.value)
        assert not out.is_vacuum_replacement.any()

    def test_full_replacement(self, rng):
        batch = self.make_batch(rng, reps=1000, modes=2)  # 6000 entries
        out = inject_loss_replacement(batch, 1.0, rng)
        assert out.is_vacuum_replacement.all()
        assert np.var(out.value) == pytest.approx(1.0, rel=0.02)

    def test_exact_replacement_count(self, rng):
        batch = self.make_batch(rng, reps=1000, modes=2)
        out = inject_loss_replacement(batch, 0.05, rng)
        assert int(out.is_vacuum_replacement.sum()) == 300

    def test_metadata_preserved(self, rng):
        batch = self.make_batch(rng, reps=20)
        out = inject_loss_replacement(batch, 0.5, rng)
        assert np.array_equal(out.repetition, batch.repetition)
        assert np.array_equal(out.mode, batch.mode)
        assert np.array_equal(out.phase, batch.phase)
        untouched = ~out.is_vacuum_replacement
        assert np.array_equal(out.value[untouched], batch.value[untouched])


class TestBatchStorage:
    def test_csv_round_trip_exact(self, rng, tmp_path):
        form = random_form(rng, mode_count=2, kind="add")
        protocol = draw_phase_protocol(2, rng)
        batch = sample_joint_quadratures(form, protocol, 25, rng, state_id="rt")
        batch = inject_loss_replacement(batch, 0.1, rng)
        path = tmp_path / "batch.csv"
        batch.to_csv(path)
        restored = QuadratureBatch.from_csv(path)
        assert restored.state_id == "rt"
        assert np.array_equal(restored.repetition, batch.repetition)
        assert np.array_equal(restored.mode, batch.mode)
        assert np.array_equal(restored.phase_index, batch.phase_index)
        assert np.array_equal(restored.phase, batch.phase)
        assert np.array_equal(restored.value, batch.value)
        assert np.array_equal(restored.is_vacuum_replacement, batch.is_vacuum_replacement)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            QuadratureBatch.from_csv(path)

    def test_subsample_repetitions(self, rng):
        form = random_form(rng, mode_count=2, kind="none")
        protocol = draw_phase_protocol(2, rng)
        batch = sample_joint_quadratures(form, protocol, 100, rng)
        sub = batch.subsample_repetitions(40, rng)
        assert len(sub) == 40 * 3 * 2
        assert set(np.unique(sub.repetition)) == set(range(1, 41))
        with pytest.raises(ValueError):
            batch.subsample_repetitions(101, rng)
