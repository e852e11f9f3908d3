"""Tests of binning, labeling, band filtering, splits, and dataset files."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wignet.features import (
    Dataset,
    EmptyGroupWarning,
    LabeledExample,
    bin_quadratures,
    dataset_arrays,
    default_cutoff,
    filter_cutoff_band,
    label_state,
    load_dataset,
    save_dataset,
    split_dataset,
)
from wignet.sampling import QuadratureBatch


def make_batch(values, modes=None, slots=None, state_id="t"):
    values = np.asarray(values, dtype=float)
    if slots is None:
        # replicate the same values into all three phase slots
        slots = np.repeat([1, 2, 3], values.size)
        values = np.tile(values, 3)
        modes = None if modes is None else np.tile(np.asarray(modes), 3)
    else:
        slots = np.asarray(slots)
    n = values.size
    modes = np.ones(n, dtype=int) if modes is None else np.asarray(modes)
    return QuadratureBatch(
        state_id=state_id,
        repetition=np.arange(1, n + 1),
        mode=modes,
        phase_index=slots,
        phase=np.zeros(n),
        value=values,
        is_vacuum_replacement=np.zeros(n, dtype=bool),
    )


def make_example(w_min, label=None, cutoff=-0.1, state_id="x", n_features=15):
    label = label_state(w_min, cutoff) if label is None else label
    return LabeledExample(state_id, np.zeros(n_features), w_min, label)


class TestBinQuadratures:
    def test_vacuum_group_sums_near_one(self, rng):
        """3000 vacuum draws: tail mass beyond |5| is negligible."""
        batch = make_batch(rng.standard_normal(3000))
        features = bin_quadratures(batch, 1)
        assert features[:5].sum() >= 0.999

    def test_all_zero_values_fill_center_bin(self):
        batch = make_batch(np.zeros(10))
        features = bin_quadratures(batch, 1)
        assert np.array_equal(features[:5], np.array([0, 0, 1, 0, 0.0]))

    def test_empty_group_warns_and_zeroes(self):
        batch = make_batch(np.zeros(5))  # mode 1 only; mode 2 groups are empty
        with pytest.warns(EmptyGroupWarning):
            features = bin_quadratures(batch, 2)
        assert features.shape == (30,)
        assert np.array_equal(features[15:], np.zeros(15))

    def test_out_of_range_counts_in_denominator(self):
        batch = make_batch([0.0, 10.0, -7.0, 2.0])
        features = bin_quadratures(batch, 1)
        assert features[:5].sum() == pytest.approx(0.5)
        assert features[2] == pytest.approx(0.25)  # the 0.0
        assert features[3] == pytest.approx(0.25)  # the 2.0

    def test_edge_values_land_in_single_bins(self):
        batch = make_batch([-5.0, -3.0, -1.0, 1.0, 3.0, 5.0])
        features = bin_quadratures(batch, 1)
        # numpy histogram: left-closed bins, top edge included in the last bin
        assert np.allclose(features[:5] * 6, np.array([1, 1, 1, 1, 2]))

    def test_feature_layout_mode_major(self, rng):
        values = np.concatenate([np.zeros(4), np.full(4, 4.0)])
        modes = np.array([1, 1, 1, 1, 2, 2, 2, 2])
        slots = np.array([1, 1, 2, 2, 3, 3, 1, 1])
        batch = make_batch(values, modes, slots)
        with pytest.warns(EmptyGroupWarning):
            features = bin_quadratures(batch, 2)
        assert features[2] == 1.0  # mode 1 slot 1: zeros in center bin
        assert features[5 + 2] == 1.0  # mode 1 slot 2
        assert features[15 + 4] == 1.0  # mode 2 slot 1: 4.0 in top bin
        assert features[15 + 10 + 4] == 1.0  # mode 2 slot 3

    def test_unknown_mode_rejected(self):
        batch = make_batch([0.0], modes=np.array([3]))
        with pytest.raises(ValueError, match="modes outside"):
            bin_quadratures(batch, 2)

    def test_unknown_slot_rejected(self):
        batch = make_batch([0.0], slots=np.array([4]))
        with pytest.raises(ValueError, match="phase indices"):
            bin_quadratures(batch, 1)

    @given(st.randoms(use_true_random=False))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariance(self, pyrandom):
        """Binning only sees the multiset of values per group."""
        values = np.linspace(-6, 6, 30)
        order = list(range(30))
        pyrandom.shuffle(order)
        base = bin_quadratures(make_batch(values), 1)
        shuffled = bin_quadratures(make_batch(values[order]), 1)
        assert np.array_equal(base, shuffled)


class TestLabelState:
    def test_maximal_negativity_is_positive_class(self):
        m = 3
        assert label_state(-1.0 / (2 * np.pi) ** m, default_cutoff(m)) == 1

    def test_zero_minimum_is_negative_class(self):
        assert label_state(0.0, default_cutoff(3)) == 0

    def test_band_value_is_negative_class(self):
        m = 3
        assert label_state(-0.05 / (2 * np.pi) ** m, default_cutoff(m)) == 0

    def test_positive_cutoff_rejected(self):
        with pytest.raises(ValueError):
            label_state(-1.0, cutoff=0.1)

    def test_zero_cutoff_allowed(self):
        assert label_state(-1e-12, 0.0) == 1
        assert label_state(0.0, 0.0) == 0

    @given(
        st.floats(min_value=-1, max_value=1, allow_nan=False),
        st.floats(min_value=-1, max_value=1, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotonicity(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert label_state(lo, -0.1) >= label_state(hi, -0.1)


class TestFilterCutoffBand:
    CUTOFF = default_cutoff(2)

    def test_band_member_removed(self):
        kept = filter_cutoff_band([make_example(self.CUTOFF / 2, cutoff=self.CUTOFF)], self.CUTOFF)
        assert kept == []

    def test_below_band_kept(self):
        example = make_example(2 * self.CUTOFF, cutoff=self.CUTOFF)
        assert filter_cutoff_band([example], self.CUTOFF) == [example]
        assert example.label == 1

    def test_positive_kept(self):
        example = make_example(0.3, cutoff=self.CUTOFF)
        assert filter_cutoff_band([example], self.CUTOFF) == [example]
        assert example.label == 0

    def test_zero_cutoff_rejected(self):
        with pytest.raises(ValueError):
            filter_cutoff_band([], 0.0)


class TestSplitDataset:
    def make_dataset(self, n, positive_fraction=0.5, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        examples = []
        for i in range(n):
            label = 1 if i < positive_fraction * n else 0
            w_min = -0.5 if label else 0.5
            examples.append(LabeledExample(f"s{i}", rng.uniform(size=15), w_min, label))
        return Dataset(mode_count=1, cutoff=-0.1, examples=examples)

    def test_4000_gives_3200_800(self, rng):
        dataset = split_dataset(self.make_dataset(4000), 0.8, rng)
        assert dataset.split.count("train") == 3200
        assert dataset.split.count("val") == 800

    def test_ten_examples_half_split(self, rng):
        dataset = split_dataset(self.make_dataset(10), 0.5, rng)
        assert dataset.split.count("train") == 5
        assert dataset.split.count("val") == 5

    def test_stratification_keeps_balance(self, rng):
        dataset = split_dataset(self.make_dataset(1000, positive_fraction=0.45), 0.8, rng)
        for name in ("train", "val"):
            subset = dataset.subset(name)
            fraction = np.mean([ex.label for ex in subset])
            assert abs(fraction - 0.45) < 0.05

    def test_deterministic(self):
        base = self.make_dataset(100)
        a = split_dataset(base, 0.8, np.random.default_rng(4))
        b = split_dataset(base, 0.8, np.random.default_rng(4))
        assert a.split == b.split

    def test_small_dataset_rejected(self, rng):
        with pytest.raises(ValueError, match="refusing"):
            split_dataset(self.make_dataset(9), 0.8, rng)

    def test_bad_ratio_rejected(self, rng):
        with pytest.raises(ValueError):
            split_dataset(self.make_dataset(100), 1.0, rng)


class TestDatasetFiles:
    def make_dataset(self, rng, n=40, mode_count=2):
        examples = [
            LabeledExample(f"s{i}", rng.uniform(size=15 * mode_count), float(rng.normal()), int(i % 2))
            for i in range(n)
        ]
        dataset = Dataset(mode_count=mode_count, cutoff=default_cutoff(mode_count), examples=examples, seed=7)
        return split_dataset(dataset, 0.8, rng)

    def test_round_trip_exact(self, rng, tmp_path):
        dataset = self.make_dataset(rng)
        path = tmp_path / "data.csv"
        save_dataset(dataset, path)
        restored = load_dataset(path)
        assert restored.mode_count == dataset.mode_count
        assert restored.cutoff == dataset.cutoff
        assert restored.seed == 7
        assert restored.split == dataset.split
        for a, b in zip(restored.examples, dataset.examples):
            assert a.state_id == b.state_id
            assert np.array_equal(a.features, b.features)
            assert a.w_min == b.w_min
            assert a.label == b.label

    def test_no_temp_files_left(self, rng, tmp_path):
        save_dataset(self.make_dataset(rng), tmp_path / "data.csv")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["data.csv"]

    def test_dataset_arrays(self, rng, tmp_path):
        dataset = self.make_dataset(rng, n=20)
        x, y = dataset_arrays(dataset, "train")
        assert x.shape == (16, 30)
        assert y.shape == (16,)
        x_all, _ = dataset_arrays(dataset)
        assert x_all.shape == (20, 30)
