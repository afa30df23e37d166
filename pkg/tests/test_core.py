import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from privcal import core
from privcal.core import BinningScheme, Dataset, LabeledLogits

from conftest import loop_ece, loop_tallies, random_dataset


def ds(rows, labels):
    return Dataset(np.array(rows, dtype=float), np.array(labels))


logit_rows = st.integers(2, 10).flatmap(
    # 0.1-spaced values: exact ties occur, subnormal near-ties do not
    lambda m: arrays(np.float64, (m,), elements=st.integers(-300, 300).map(lambda x: x / 10))
)


class TestLabeledLogits:
    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            LabeledLogits([-5.0], 0)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            LabeledLogits([1.0, 2.0], 2)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            LabeledLogits([1.0, math.inf], 0)

    def test_dataset_checks_labels(self):
        with pytest.raises(ValueError):
            ds([[1, 2, 3]], [3])

    def test_dataset_roundtrip_samples(self):
        d = ds([[1, 2], [3, 0]], [1, 0])
        again = Dataset.from_samples(list(d))
        np.testing.assert_array_equal(again.logits, d.logits)
        np.testing.assert_array_equal(again.labels, d.labels)


class TestPredictLabel:
    def test_unique_max(self):
        assert core.predict_label(LabeledLogits([3, 1, 2], 0)) == 0

    def test_tie_breaks_low(self):
        assert core.predict_label(LabeledLogits([1, 1], 1)) == 0

    @given(logit_rows, st.floats(0.01, 100))
    def test_temperature_invariant(self, row, T):
        sample = LabeledLogits(row, 0)
        assert int(np.argmax(row / T)) == core.predict_label(sample)
        assert core.confidence(sample, T) == pytest.approx(core.softmax(row, T)[core.predict_label(sample)])


class TestConfidence:
    def test_symmetric(self):
        assert core.confidence(LabeledLogits([1, 1], 0), 0.7) == 0.5

    def test_against_high_precision(self):
        mpmath.mp.dps = 40
        expected = float(mpmath.e / (mpmath.e + 1))
        assert core.confidence(LabeledLogits([2, 0], 0), 2.0) == pytest.approx(expected, abs=1e-15)

    def test_uniform_limit(self):
        assert core.confidence(LabeledLogits([4, 0, 0], 0), 1e6) == pytest.approx(1 / 3, abs=1e-5)

    @pytest.mark.parametrize("T", [0.0, -1.0, math.nan])
    def test_bad_temperature(self, T):
        with pytest.raises(ValueError):
            core.confidence(LabeledLogits([1, 0], 0), T)

    def test_no_overflow_for_large_logits(self):
        c = core.confidence(LabeledLogits([1000.0, 999.0], 0), 1.0)
        assert c == pytest.approx(1 / (1 + math.exp(-1)))

    @given(logit_rows, st.floats(0.01, 100))
    def test_softmax_normalized(self, row, T):
        assert abs(core.softmax(row, T).sum() - 1.0) <= 1e-12

    @given(logit_rows, st.floats(0.01, 50), st.floats(0.01, 50))
    def test_monotone_in_temperature(self, row, t1, t2):
        lo, hi = sorted((t1, t2))
        sample = LabeledLogits(row, 0)
        assert core.confidence(sample, lo) >= core.confidence(sample, hi) - 1e-15

    @given(logit_rows, st.floats(0.01, 100))
    def test_range(self, row, T):
        c = core.confidence(LabeledLogits(row, 0), T)
        assert 1 / len(row) - 1e-15 <= c <= 1.0


class TestAccuracyAndAverageConfidence:
    def test_all_correct(self):
        assert core.accuracy(ds([[2, 0], [0, 3], [5, 1]], [0, 1, 0])) == 1.0

    def test_quarter(self):
        assert core.accuracy(ds([[2, 0], [2, 0], [2, 0], [2, 0]], [0, 1, 1, 1])) == 0.25

    def test_never_correct(self):
        assert core.accuracy(ds([[2, 0, 0], [0, 3, 0]], [1, 2])) == 0.0

    def test_empty(self):
        empty = Dataset(np.empty((0, 3)), np.empty(0, dtype=int))
        with pytest.raises(ValueError):
            core.accuracy(empty)
        with pytest.raises(ValueError):
            core.average_confidence(empty)

    def test_tied_logits(self):
        d = ds([[1, 1], [-2, -2]], [0, 1])
        for T in (0.1, 1.0, 7.0):
            assert core.average_confidence(d, T) == 0.5

    def test_single_sample(self):
        assert core.average_confidence(ds([[2, 0]], [0]), 2.0) == pytest.approx(0.7310585786300049, abs=1e-15)

    def test_monotone(self):
        d = random_dataset(np.random.default_rng(3))
        assert core.average_confidence(d, 1.0) >= core.average_confidence(d, 2.0)


class TestNLL:
    def test_symmetric(self):
        assert core.nll_sum(ds([[1, 1]], [0]), 1.0) == pytest.approx(math.log(2), abs=1e-15)

    def test_confident_correct(self):
        assert core.nll_sum(ds([[50, 0, 0]], [0]), 1.0) < 1e-20

    def test_clip(self):
        a = math.log(math.expm1(14.0))  # raw NLL of label 1 is log(1 + e^a) = 14
        d = ds([[a, 0.0]], [1])
        assert core.nll_per_sample(d)[0] == pytest.approx(14.0)
        assert core.nll_sum(d, 1.0) == 10.0
        assert core.nll_sum(d, 1.0, clip=20.0) == pytest.approx(14.0)

    @pytest.mark.parametrize("kw", [{"T": 0.0}, {"clip": 0.0}, {"clip": -1.0}])
    def test_bad_args(self, kw):
        with pytest.raises(ValueError):
            core.nll_sum(ds([[1, 0]], [0]), **kw)

    def test_matches_loop(self):
        d = random_dataset(np.random.default_rng(11))
        expected = 0.0
        for row, y in zip(d.logits.tolist(), d.labels.tolist()):
            scaled = [x / 1.7 for x in row]
            top = max(scaled)
            expected += min(10.0, top + math.log(sum(math.exp(s - top) for s in scaled)) - scaled[y])
        assert core.nll_sum(d, 1.7) == pytest.approx(expected, rel=1e-12)


class TestBinning:
    def test_zero(self):
        assert core.bin_index(0.0, BinningScheme(15)) == 0

    def test_one_in_last_bin(self):
        assert core.bin_index(1.0, BinningScheme(15)) == 14

    def test_half_open(self):
        assert core.bin_index(1 / 15, BinningScheme(15)) == 1

    @pytest.mark.parametrize("c", [-0.01, 1.01, math.nan])
    def test_out_of_range(self, c):
        with pytest.raises(ValueError):
            core.bin_index(c, BinningScheme(15))

    def test_bad_scheme(self):
        with pytest.raises(ValueError):
            BinningScheme(0)

    def test_edges_cover_unit_interval(self):
        e = BinningScheme(15).edges
        assert e[0] == 0.0 and e[-1] == 1.0 and len(e) == 16

    @given(st.floats(0, 1), st.integers(1, 50))
    def test_vector_matches_scalar(self, c, k):
        scheme = BinningScheme(k)
        assert core.bin_indices(np.array([c]), scheme)[0] == core.bin_index(c, scheme)


class TestConfidenceStats:
    def test_single_sample(self):
        # logit gap log(9) gives confidence 0.9 for two classes
        d = ds([[math.log(9.0), 0.0]], [0])
        s = core.confidence_stats(d, 1.0, BinningScheme(15))
        assert s.n_bin[13] == 1 and s.n_correct[13] == 1
        assert s.conf_sum[13] == pytest.approx(0.9)
        assert s.n_bin.sum() == 1 and s.n_total == 1

    def test_duplicates_double(self):
        d = ds([[2, 0, 1], [0, 1, 3]], [0, 1])
        twice = ds([[2, 0, 1], [0, 1, 3]] * 2, [0, 1] * 2)
        s1 = core.confidence_stats(d, 1.3)
        s2 = core.confidence_stats(twice, 1.3)
        np.testing.assert_allclose(s2.n_bin, 2 * s1.n_bin)
        np.testing.assert_allclose(s2.n_correct, 2 * s1.n_correct)
        np.testing.assert_allclose(s2.conf_sum, 2 * s1.conf_sum, rtol=1e-15)

    def test_mixed_matches_loop(self):
        d = ds([[3, 0, 0], [0.2, 0, 0.1], [1, 2, 0], [0, 0, 5]], [0, 2, 0, 2])
        s = core.confidence_stats(d, 0.8, BinningScheme(15))
        n_bin, n_correct, conf_sum = loop_tallies(d, 0.8, 15)
        np.testing.assert_array_equal(s.n_bin, n_bin)
        np.testing.assert_array_equal(s.n_correct, n_correct)
        np.testing.assert_allclose(s.conf_sum, conf_sum, atol=1e-14)

    def test_invariants_random(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            d = random_dataset(rng)
            s = core.confidence_stats(d, rng.uniform(0.1, 5), BinningScheme(int(rng.integers(1, 20))))
            assert s.n_bin.sum() == s.n_total == len(d)
            assert np.all(s.n_correct <= s.n_bin) and np.all(s.n_correct >= 0)
            assert np.all(s.conf_sum <= s.n_bin + 1e-12) and np.all(s.conf_sum >= 0)


class TestECE:
    def test_perfect(self):
        d = ds([[800, 0], [0, 900]], [0, 1])
        assert core.ece(d) == 0.0

    def test_one_bin_identity(self):
        d = random_dataset(np.random.default_rng(8))
        gap = abs(core.accuracy(d) - core.average_confidence(d, 1.4))
        assert core.ece(d, 1.4, BinningScheme(1)) == pytest.approx(gap, abs=1e-12)

    def test_six_sample_three_bins(self):
        # two-class confidences 0.9, 0.95, 0.6, 0.65, 0.75, 0.72 -> bins 13/14, 9, 11/10
        gaps = [0.9, 0.95, 0.6, 0.65, 0.75, 0.72]
        rows = [[math.log(c / (1 - c)), 0.0] for c in gaps]
        d = ds(rows, [0, 1, 0, 0, 1, 0])
        scheme = BinningScheme(15)
        assert len(set(core.bin_indices(np.array(gaps), scheme))) >= 3
        assert core.ece(d, 1.0, scheme) == pytest.approx(loop_ece(d, 1.0, 15), abs=1e-14)

    def test_bounds(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            d = random_dataset(rng)
            assert 0.0 <= core.ece(d, rng.uniform(0.1, 5)) <= 1.0

    def test_empty_bins_contribute_nothing(self):
        d = ds([[math.log(9.0), 0.0]], [1])
        assert core.ece(d, 1.0, BinningScheme(15)) == pytest.approx(0.9)

    def test_matches_confidence_path(self):
        d = random_dataset(np.random.default_rng(10))
        assert core.ece(d, 1.2) == core.ece_from_confidences(core.confidences(d, 1.2), core.correctness(d))
