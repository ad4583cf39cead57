"""Graph primitives shared by every solver: pairwise distances, Gaussian
affinities, degree/Laplacian construction, and connected-component counting.

Data matrices are column-major: an array of shape (d, n) holds n samples of
dimension d, one sample per column. Affinity/similarity matrices are (n, n).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _csgraph_components

from .errors import DataValidationError


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureMatrix:
    """A d x n data matrix (samples are columns) with optional labels."""

    data: np.ndarray
    feature_names: tuple = None
    labels: np.ndarray = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise DataValidationError(f"data must be 2-D, got shape {data.shape}")
        d, n = data.shape
        if d < 1 or n < 2:
            raise DataValidationError(f"need d >= 1 and n >= 2, got d={d}, n={n}")
        if not np.all(np.isfinite(data)):
            raise DataValidationError("data contains non-finite entries")
        object.__setattr__(self, "data", _freeze(data))
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != d:
                raise DataValidationError(
                    f"{len(names)} feature names for {d} features")
            object.__setattr__(self, "feature_names", names)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DataValidationError(
                    f"labels must have shape ({n},), got {labels.shape}")
            object.__setattr__(self, "labels", _freeze(labels))

    @property
    def n(self):
        return self.data.shape[1]

    @property
    def d(self):
        return self.data.shape[0]

    @property
    def n_classes(self):
        if self.labels is None:
            return None
        return len(np.unique(self.labels))


@dataclass(frozen=True)
class FixedAffinity:
    """Symmetric nonnegative affinity matrix from a Gaussian kernel."""

    weights: np.ndarray
    bandwidth: float

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DataValidationError(f"affinity must be square, got {W.shape}")
        if self.bandwidth <= 0:
            raise DataValidationError("bandwidth must be positive")
        object.__setattr__(self, "weights", _freeze(W))

    @property
    def n(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class SimilarityGraph:
    """Learned row-stochastic similarity matrix, stored sparse row-wise.

    Each row lies on the probability simplex with at most ``neighbor_count``
    strictly positive entries and a zero diagonal.
    """

    weights: sp.csr_array
    neighbor_count: int

    def __post_init__(self):
        W = self.weights
        if not sp.issparse(W):
            W = sp.csr_array(np.asarray(W, dtype=float))
        else:
            W = sp.csr_array(W).astype(float)
        if W.shape[0] != W.shape[1]:
            raise DataValidationError(f"similarity must be square, got {W.shape}")
        object.__setattr__(self, "weights", W)

    @property
    def n(self):
        return self.weights.shape[0]

    def dense(self):
        return self.weights.toarray()

    def validate(self, atol=1e-10):
        """Assert the row-stochastic / sparsity / range invariants."""
        S = self.dense()
        if np.any(S < -atol) or np.any(S > 1 + atol):
            raise DataValidationError("similarity entries outside [0, 1]")
        if np.max(np.abs(S.diagonal())) > atol:
            raise DataValidationError("similarity diagonal is not zero")
        row_sums = S.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > atol:
            raise DataValidationError("similarity rows do not sum to 1")
        nnz = (S > atol).sum(axis=1)
        if np.any(nnz > self.neighbor_count):
            raise DataValidationError(
                f"a row has more than k={self.neighbor_count} positive entries")
        return self


@dataclass(frozen=True)
class LaplacianPair:
    """Degree diagonal and symmetric Laplacian of a (symmetrized) graph."""

    degree: np.ndarray
    laplacian: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "degree", _freeze(self.degree))
        object.__setattr__(self, "laplacian", _freeze(self.laplacian))

    @property
    def degree_matrix(self):
        return np.diag(self.degree)


def _as_data(X):
    if isinstance(X, FeatureMatrix):
        return X.data
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataValidationError("data contains non-finite entries")
    return X


def _as_weights(S):
    if isinstance(S, SimilarityGraph):
        return S.dense()
    if isinstance(S, FixedAffinity):
        return S.weights
    if sp.issparse(S):
        return S.toarray()
    return np.asarray(S, dtype=float)


def pairwise_sq_distances(X, projection=None):
    """Squared Euclidean distances between all column pairs.

    With ``projection`` (d x m), distances are taken between projected
    columns. The result is exactly symmetric with a zero diagonal, and
    negative rounding dust is clamped away.
    """
    data = _as_data(X)
    if projection is not None:
        W = np.asarray(projection, dtype=float)
        if W.shape[0] != data.shape[0]:
            raise DataValidationError(
                f"projection has {W.shape[0]} rows for {data.shape[0]} features")
        data = W.T @ data
    sq = np.einsum("ij,ij->j", data, data)
    D = sq[:, None] + sq[None, :] - 2.0 * (data.T @ data)
    np.maximum(D, 0.0, out=D)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def mean_pairwise_distance(X):
    """Mean of the off-diagonal pairwise (non-squared) distances."""
    D = np.sqrt(pairwise_sq_distances(X))
    n = D.shape[0]
    return float(D.sum() / (n * (n - 1)))


def gaussian_affinity(X, bandwidth=None):
    """Gaussian-kernel affinity a_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)).

    The diagonal is zeroed. When ``bandwidth`` is omitted it defaults to the
    mean pairwise distance of the data.
    """
    data = _as_data(X)
    if bandwidth is None:
        bandwidth = mean_pairwise_distance(data)
        if bandwidth <= 0:
            raise DataValidationError("all samples identical; bandwidth is 0")
    if bandwidth <= 0:
        raise DataValidationError("bandwidth must be positive")
    D = pairwise_sq_distances(data)
    A = np.exp(-D / (2.0 * bandwidth**2))
    np.fill_diagonal(A, 0.0)
    A = 0.5 * (A + A.T)
    return FixedAffinity(weights=A, bandwidth=float(bandwidth))


def laplacian(S):
    """Degree and Laplacian of the symmetrized graph (S + S^T) / 2.

    Works for learned (possibly asymmetric) similarity matrices as well as
    fixed affinities; the symmetrized form is used throughout.
    """
    W = _as_weights(S)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DataValidationError(f"graph matrix must be square, got {W.shape}")
    if np.any(W < 0):
        raise DataValidationError("graph weights must be nonnegative")
    A = 0.5 * (W + W.T)
    deg = A.sum(axis=1)
    L = np.diag(deg) - A
    L = 0.5 * (L + L.T)
    return LaplacianPair(degree=deg, laplacian=L)


def connected_components(S, tol=1e-8):
    """Count connected components of the thresholded undirected graph.

    An edge (i, j) exists when (s_ij + s_ji) / 2 > tol. Returns
    ``(count, labels)`` where equal labels mark the same component.
    """
    if tol < 0:
        raise DataValidationError("tol must be nonnegative")
    W = _as_weights(S)
    A = 0.5 * (W + W.T)
    adj = sp.csr_array(A > tol)
    count, labels = _csgraph_components(adj, directed=False)
    return int(count), labels


def component_count_from_spectrum(L, tol=1e-8):
    """Number of (near-)zero Laplacian eigenvalues; eigen cross-check of
    ``connected_components``. Graph traversal remains the authoritative count.
    """
    mat = L.laplacian if isinstance(L, LaplacianPair) else np.asarray(L, float)
    vals = np.linalg.eigvalsh(mat)
    return int(np.sum(vals < tol))


def centered_columns(X):
    """Columns with the mean column removed: X H for H = I - (1/n) 1 1^T.

    H itself is never materialized; use ``centering_matrix`` only for tests.
    """
    data = _as_data(X)
    return data - data.mean(axis=1, keepdims=True)


def centering_matrix(n):
    """Explicit H = I - (1/n) 1 1^T, for verification purposes only."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def scatter_trace(X, W=None):
    """Tr(W^T X H X^T W): total scatter of the (projected) centered data."""
    C = centered_columns(X)
    if W is not None:
        C = np.asarray(W, dtype=float).T @ C
    return float(np.sum(C * C))
