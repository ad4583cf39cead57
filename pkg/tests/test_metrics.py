"""Metric tests: hand evaluations, brute-force mapping oracle, invariances."""
import itertools
import warnings

import numpy as np
import pytest

from dogc.errors import DataValidationError
from dogc.metrics import ContingencyTable, accuracy, nmi, purity


def accuracy_by_enumeration(pred, truth):
    """Best label bijection by exhaustive search; oracle for small c."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    pred_ids = np.unique(pred)
    true_ids = np.unique(truth)
    size = max(len(pred_ids), len(true_ids))
    best = 0
    for perm in itertools.permutations(range(size)):
        matched = 0
        for i, pid in enumerate(pred_ids):
            if perm[i] < len(true_ids):
                matched += int(np.sum((pred == pid)
                                      & (truth == true_ids[perm[i]])))
        best = max(best, matched)
    return best / len(pred)


class TestAccuracy:
    def test_identical_labels(self):
        assert accuracy([0, 1, 2, 0], [0, 1, 2, 0]) == 1.0

    def test_relabeled_partition_is_perfect(self):
        truth = [0, 0, 1, 1, 2, 2]
        pred = [2, 2, 0, 0, 1, 1]
        assert accuracy(pred, truth) == 1.0

    def test_matches_permutation_enumeration(self, rng):
        for _ in range(30):
            pred = rng.integers(0, 4, 12)
            truth = rng.integers(0, 4, 12)
            assert accuracy(pred, truth) == pytest.approx(
                accuracy_by_enumeration(pred, truth))

    def test_unequal_cluster_counts(self, rng):
        for _ in range(20):
            pred = rng.integers(0, 6, 15)
            truth = rng.integers(0, 3, 15)
            assert accuracy(pred, truth) == pytest.approx(
                accuracy_by_enumeration(pred, truth))

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataValidationError):
            accuracy([0, 1], [0, 1, 2])


class TestNmi:
    def test_identical_partitions(self):
        assert nmi([0, 0, 1, 2], [5, 5, 7, 9]) == pytest.approx(1.0, abs=1e-12)

    def test_independent_partitions_are_zero(self):
        assert nmi([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_hand_evaluated_value(self):
        # truth [0,0,1,1], pred [0,0,0,1]: counts are {0:(2,1),1:(0,1)}
        log = np.log
        info = (2 * log(4 * 2 / (3 * 2)) + 1 * log(4 * 1 / (3 * 2))
                + 1 * log(4 * 1 / (1 * 2)))
        denom = np.sqrt((3 * log(3 / 4) + 1 * log(1 / 4))
                        * (2 * log(2 / 4) + 2 * log(2 / 4)))
        expected = info / denom
        assert nmi([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(expected,
                                                                abs=1e-12)

    def test_single_cluster_warns_and_returns_zero(self):
        with pytest.warns(UserWarning, match="entropy"):
            assert nmi([0, 0, 0], [0, 1, 2]) == 0.0

    def test_symmetry(self, rng):
        for _ in range(50):
            a = rng.integers(0, 4, 20)
            b = rng.integers(0, 3, 20)
            if len(np.unique(a)) < 2 or len(np.unique(b)) < 2:
                continue
            assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)


class TestPurity:
    def test_identical_labels(self):
        assert purity([1, 2, 3], [4, 5, 6]) == 1.0

    def test_hand_counted_example(self):
        assert purity([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(0.75)

    def test_single_cluster_gives_majority_fraction(self):
        assert purity([0, 0, 0, 0], [0, 1, 1, 2]) == pytest.approx(0.5)


class TestSharedProperties:
    def test_relabeling_invariance_and_ranges(self, rng):
        for _ in range(200):
            n = int(rng.integers(4, 40))
            cp = int(rng.integers(2, 6))
            ct = int(rng.integers(2, 6))
            pred = rng.integers(0, cp, n)
            truth = rng.integers(0, ct, n)
            if len(np.unique(pred)) < 2 or len(np.unique(truth)) < 2:
                continue
            perm_p = rng.permutation(cp)
            perm_t = rng.permutation(ct)
            pred2 = perm_p[pred]
            truth2 = perm_t[truth]
            for metric in (accuracy, nmi, purity):
                v1 = metric(pred, truth)
                v2 = metric(pred2, truth2)
                assert v1 == pytest.approx(v2, abs=1e-12)
                assert 0.0 <= v1 <= 1.0

    def test_purity_dominates_matched_fraction(self, rng):
        # purity allows many-to-one assignment, so it can never fall below
        # the Hungarian-matched fraction
        for _ in range(200):
            n = int(rng.integers(4, 40))
            pred = rng.integers(0, int(rng.integers(2, 7)), n)
            truth = rng.integers(0, int(rng.integers(2, 7)), n)
            assert purity(pred, truth) >= accuracy(pred, truth) - 1e-12


class TestContingencyTable:
    def test_marginals_consistent(self, rng):
        pred = rng.integers(0, 3, 25)
        truth = rng.integers(0, 4, 25)
        table = ContingencyTable.from_labels(pred, truth)
        assert table.total == 25
        np.testing.assert_array_equal(table.counts.sum(axis=1), table.row_sums)
        np.testing.assert_array_equal(table.counts.sum(axis=0), table.col_sums)
