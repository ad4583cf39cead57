"""Clustering evaluation: Hungarian-matched accuracy, normalized mutual
information, and purity. All three are invariant to relabeling on either
side and live in [0, 1].
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataValidationError


@dataclass(frozen=True)
class ContingencyTable:
    """Joint counts of predicted clusters (rows) against true classes."""

    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    total: int

    @classmethod
    def from_labels(cls, pred, truth):
        pred = np.asarray(pred).ravel()
        truth = np.asarray(truth).ravel()
        if pred.shape != truth.shape:
            raise DataValidationError(
                f"label lengths differ: {pred.shape[0]} vs {truth.shape[0]}")
        if pred.size == 0:
            raise DataValidationError("empty label arrays")
        _, pi = np.unique(pred, return_inverse=True)
        _, ti = np.unique(truth, return_inverse=True)
        counts = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
        np.add.at(counts, (pi, ti), 1)
        return cls(counts=counts, row_sums=counts.sum(axis=1),
                   col_sums=counts.sum(axis=0), total=int(counts.sum()))


def accuracy(pred, truth):
    """Best-bijection label match rate via the Hungarian assignment.

    The contingency table is zero-padded to a square so unequal cluster
    counts are handled; padding columns cost nothing.
    """
    table = ContingencyTable.from_labels(pred, truth)
    counts = table.counts
    size = max(counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:counts.shape[0], :counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(-padded)
    return float(padded[rows, cols].sum() / table.total)


def nmi(pred, truth):
    """Mutual information over the geometric mean of the two entropies.

    Degenerate single-cluster partitions have zero entropy; the 0/0 case
    returns 0 with a warning.
    """
    table = ContingencyTable.from_labels(pred, truth)
    n = table.total
    counts = table.counts.astype(float)
    ri = table.row_sums.astype(float)
    cj = table.col_sums.astype(float)

    h_pred = float(np.sum(ri * np.log(ri / n)))
    h_true = float(np.sum(cj * np.log(cj / n)))
    denom = np.sqrt(h_pred * h_true)
    if denom == 0.0:
        warnings.warn("single-cluster partition has zero entropy; NMI := 0")
        return 0.0

    nz = counts > 0
    outer = ri[:, None] * cj[None, :]
    info = float(np.sum(counts[nz] * np.log(n * counts[nz] / outer[nz])))
    return float(np.clip(info / denom, 0.0, 1.0))


def purity(pred, truth):
    """Fraction correctly assigned when each cluster takes its majority class."""
    table = ContingencyTable.from_labels(pred, truth)
    return float(table.counts.max(axis=1).sum() / table.total)
