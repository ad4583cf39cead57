"""Per-variable update rules for the alternating clustering solvers.

Each function solves one subproblem exactly (simplex rows, rotation, label
assignment, ridge predictor) or monotonically (orthonormal embedding,
trace-ratio projection). All functions are pure: arrays in, arrays out.

Set the environment variable ``DOGC_STRICT=1`` (or flip ``STRICT_CHECKS``)
to assert, on every call, that each update does not increase its own
sub-objective.
"""
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataValidationError

STRICT_CHECKS = os.environ.get("DOGC_STRICT", "") not in ("", "0")

_ORTH_TOL = 1e-8


def _check_orthonormal(M, name):
    G = M.T @ M
    err = np.max(np.abs(G - np.eye(M.shape[1])))
    if err > _ORTH_TOL:
        raise DataValidationError(f"{name} is not orthonormal (error {err:.2e})")


@dataclass(frozen=True)
class ContinuousLabels:
    """Orthonormal n x c relaxed label embedding."""

    F: np.ndarray

    def __post_init__(self):
        _check_orthonormal(self.F, "F")


@dataclass(frozen=True)
class DiscreteLabels:
    """Binary n x c indicator matrix with exactly one 1 per row."""

    Y: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if not np.all((Y == 0) | (Y == 1)):
            raise DataValidationError("indicator entries must be 0 or 1")
        if not np.all(Y.sum(axis=1) == 1):
            raise DataValidationError("each indicator row needs exactly one 1")
        object.__setattr__(self, "Y", Y)

    @property
    def labels(self):
        return np.argmax(self.Y, axis=1)

    def occupied_clusters(self):
        return np.unique(self.labels)


@dataclass(frozen=True)
class RotationMatrix:
    """Orthogonal c x c map from the continuous to the discrete label space."""

    Q: np.ndarray

    def __post_init__(self):
        _check_orthonormal(self.Q, "Q")


@dataclass(frozen=True)
class ProjectionMatrix:
    """Orthonormal d x m subspace basis used for graph learning."""

    W: np.ndarray

    def __post_init__(self):
        _check_orthonormal(self.W, "W")

    @property
    def m(self):
        return self.W.shape[1]


@dataclass(frozen=True)
class Predictor:
    """Linear map d x c from features to cluster scores, with its loss shape."""

    P: np.ndarray
    p: float = 2.0
    gamma: float = 0.1

    def __post_init__(self):
        if not np.all(np.isfinite(self.P)):
            raise DataValidationError("predictor weights must be finite")
        if not 0 < self.p <= 2:
            raise DataValidationError("loss exponent p must lie in (0, 2]")
        if self.gamma < 0:
            raise DataValidationError("ridge weight must be nonnegative")


@dataclass(frozen=True)
class IrlsWeights:
    """Positive diagonal of the reweighting matrix for the robust loss."""

    diag: np.ndarray
    epsilon_floor: float

    def __post_init__(self):
        if np.any(self.diag <= 0):
            raise DataValidationError("IRLS weights must be strictly positive")


@dataclass(frozen=True)
class GraphHyperParams:
    """Bundle of graph-learning hyperparameters."""

    k: int
    xi: float = 0.0
    lam: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise DataValidationError("neighbor count k must be >= 1")
        if self.xi < 0 or self.lam <= 0:
            raise DataValidationError("need xi >= 0 and lam > 0")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise DataValidationError("penalty weights must be nonnegative")


def project_simplex(v):
    """Euclidean projection of v onto the probability simplex.

    Exact sorting-based water-filling; no iterative root-finding.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    support = np.nonzero(u * idx > css - 1.0)[0]
    rho = support[-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def solve_similarity_row(dists, xi, self_index=None):
    """One similarity row: minimize sum_j d_j s_j + xi s_j^2 on the simplex.

    Equivalent to projecting -d / (2 xi) onto the simplex. Entries equal to
    +inf (and the ``self_index`` position) are excluded and come back as 0.
    ``xi == 0`` degenerates to all mass on the closest candidate.
    """
    d = np.array(dists, dtype=float)
    if self_index is not None:
        d[self_index] = np.inf
    active = np.isfinite(d)
    if not active.any():
        raise DataValidationError("no finite distances to assign neighbors from")
    if np.any(d[active] < 0) or xi < 0:
        raise DataValidationError("distances and xi must be nonnegative")

    s = np.zeros_like(d)
    if xi == 0.0:
        dmin = d[active].min()
        winners = np.nonzero(active & (d == dmin))[0]
        if winners.size > 1:
            warnings.warn("xi = 0 with tied minimum distance; "
                          "breaking tie toward the lowest index")
        s[winners[0]] = 1.0
        return s

    proj = project_simplex(-d[active] / (2.0 * xi))
    # Boundary entries can carry rounding dust; clamp so sparsity is exact.
    dust = proj < 1e-12 * proj.max()
    proj[dust] = 0.0
    proj /= proj.sum()
    s[active] = proj
    return s


def exact_k_regularizer(dists, k):
    """Per-row regularizer values that make each similarity row k-sparse.

    ``dists`` is the full square distance matrix; the diagonal (self
    distance) is excluded. Returns ``(xi_mean, xi_rows)``. Rows whose k+1
    nearest distances coincide give a zero value, which is floored to 1e-12
    with a warning.
    """
    D = np.asarray(dists, dtype=float)
    n = D.shape[0]
    if not 1 <= k <= n - 2:
        raise DataValidationError(f"need 1 <= k <= n-2, got k={k}, n={n}")
    off = D[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    srt = np.sort(off, axis=1)
    xi_rows = 0.5 * (k * srt[:, k] - srt[:, :k].sum(axis=1))
    bad = xi_rows <= 0
    if bad.any():
        warnings.warn(f"{int(bad.sum())} rows have duplicate neighbor "
                      "distances; flooring their regularizer to 1e-12")
        xi_rows[bad] = 1e-12
    return float(xi_rows.mean()), xi_rows


def adapt_rank_weight(components, c, weight):
    """Double / halve the rank-enforcement weight toward c components.

    Returns ``(new_weight, satisfied)`` where the flag marks an exact match.
    """
    if weight <= 0:
        raise DataValidationError("rank weight must be positive")
    if components < c:
        return 2.0 * weight, False
    if components > c:
        return 0.5 * weight, False
    return weight, True


def _polar(G):
    U, _, Vt = np.linalg.svd(G, full_matrices=False)
    return U @ Vt


def smallest_eigvecs(M, m):
    """Orthonormal eigenvectors of the m smallest eigenvalues (symmetric M)."""
    M = 0.5 * (M + M.T)
    _, vecs = scipy.linalg.eigh(M, subset_by_index=[0, m - 1])
    return vecs


def embedding_objective(L, Y, Q, alpha, rank_weight, F):
    """Sub-objective of the embedding step."""
    val = 2.0 * rank_weight * float(np.sum(F * (L @ F)))
    if alpha > 0 and Y is not None:
        val += alpha * float(np.sum((Y - F @ Q) ** 2))
    return val


def update_embedding(L, Y, Q, alpha, rank_weight, F_init,
                     max_iter=100, tol=1e-10):
    """Orthonormal embedding update: spectral term plus rotation-fit term.

    Solved by a majorize-minimize scheme on the Stiefel manifold: each step
    takes the polar factor of the shifted gradient, which never increases
    the sub-objective. Falls back to exact closed forms when one of the two
    terms vanishes (pure eigenvector problem, or a pure polar fit).
    """
    if F_init is not None:
        c = F_init.shape[1]
    elif Y is not None:
        c = Y.shape[1]
    else:
        raise DataValidationError("need F_init or Y to size the embedding")

    if alpha <= 0 or Y is None:
        return smallest_eigvecs(L, c)

    lam_bound = float(np.max(np.abs(L).sum(axis=1)))  # Gershgorin
    C = Y @ Q.T
    if rank_weight * lam_bound == 0.0:
        return _polar(C)
    if alpha * np.linalg.norm(C) <= 1e-12 * rank_weight * lam_bound:
        # The fit term is below numeric significance; the spectral solution
        # is exact to well inside the monotonicity slack.
        return smallest_eigvecs(L, c)

    if F_init is None:
        F_init = smallest_eigvecs(L, c)
    F = F_init
    sigma = 2.0 * rank_weight * lam_bound * (1.0 + 1e-9) + 1e-12
    obj = embedding_objective(L, Y, Q, alpha, rank_weight, F)
    best_F, best_obj = F, obj
    for _ in range(max_iter):
        G = sigma * F - 2.0 * rank_weight * (L @ F) + alpha * C
        F = _polar(G)
        new_obj = embedding_objective(L, Y, Q, alpha, rank_weight, F)
        if new_obj < best_obj:
            best_F, best_obj = F, new_obj
        if abs(obj - new_obj) <= tol * max(1.0, abs(obj)):
            obj = new_obj
            break
        obj = new_obj
    if obj > best_obj + 1e-12 * max(1.0, abs(best_obj)):
        warnings.warn("embedding update failed to settle; "
                      "returning the best iterate seen")
        return best_F
    if STRICT_CHECKS:
        before = embedding_objective(L, Y, Q, alpha, rank_weight, F_init)
        after = embedding_objective(L, Y, Q, alpha, rank_weight, F)
        assert after <= before + 1e-9 * max(1.0, abs(before))
    return F


def trace_ratio(X, L, W, denominator=None):
    """Tr(W^T X L X^T W) / Tr(W^T X H X^T W) for the projected scatter."""
    XW = X.T @ W
    num = float(np.sum(XW * (L @ XW)))
    if denominator is None:
        from .graph import scatter_trace
        denominator = scatter_trace(X, W)
    return num / denominator


def update_projection(X, L, m, W_init, max_sweeps=50, kkt_tol=1e-6):
    """Trace-ratio projection update by the eigen fixed-point iteration.

    Alternates between the current ratio value and the m smallest
    eigenvectors of (numerator - ratio * denominator); each sweep does not
    increase the ratio. Stops when the stationarity residual drops below
    ``kkt_tol`` or after ``max_sweeps``.
    """
    from .graph import centered_columns

    d = X.shape[0]
    if m > d:
        raise DataValidationError(f"projection width {m} exceeds dimension {d}")
    if m == d:
        return np.eye(d)

    Xc = centered_columns(X)
    num = X @ (L @ X.T)
    num = 0.5 * (num + num.T)
    den = Xc @ Xc.T
    den = 0.5 * (den + den.T)

    if np.allclose(num, 0.0):
        return W_init  # zero numerator: every feasible W is already optimal

    def den_trace(W):
        return float(np.sum((W.T @ den) * W.T))

    if den_trace(W_init) <= 1e-12:
        warnings.warn("projected total scatter is singular; regularizing")
        den = den + 1e-10 * np.eye(d)

    W = W_init
    ratio = float(np.sum((W.T @ num) * W.T)) / den_trace(W)
    for _ in range(max_sweeps):
        V = num - ratio * den
        W_new = smallest_eigvecs(V, m)
        dt = den_trace(W_new)
        if dt <= 1e-12:
            warnings.warn("projected total scatter is singular; regularizing")
            den = den + 1e-10 * np.eye(d)
            dt = den_trace(W_new)
        new_ratio = float(np.sum((W_new.T @ num) * W_new.T)) / dt
        if STRICT_CHECKS:
            assert new_ratio <= ratio + 1e-9 * max(1.0, abs(ratio))
        W, ratio = W_new, new_ratio
        V = num - ratio * den
        VW = V @ W
        resid = VW - W @ (W.T @ VW)
        if np.linalg.norm(resid) <= kkt_tol * max(1.0, np.linalg.norm(VW)):
            break
    return W


def best_rotation(F, Y):
    """Orthogonal matrix minimizing ||Y - F Q||_F^2: the polar factor of F^T Y."""
    M = F.T @ Y
    U, _, Vt = np.linalg.svd(M)
    Q = U @ Vt
    if STRICT_CHECKS:
        before = float(np.sum((Y - F) ** 2))  # objective at Q = I
        after = float(np.sum((Y - F @ Q) ** 2))
        assert after <= before + 1e-9 * max(1.0, before)
    return Q


def _one_hot_argmax(B):
    idx = np.argmax(B, axis=1)  # ties resolve to the lowest index
    Y = np.zeros_like(B)
    Y[np.arange(B.shape[0]), idx] = 1.0
    return Y


def assign_labels(F, Q):
    """Discrete indicator matrix: row-wise argmax of the rotated embedding."""
    Y = _one_hot_argmax(F @ Q)
    if STRICT_CHECKS:
        scores = F @ Q
        assert np.all(np.sum(Y * scores, axis=1) >= np.max(scores, axis=1) - 1e-12)
    return Y


def assign_labels_combined(F, Q, X, P, row_weights, alpha, beta):
    """Indicator update driven by both the rotated embedding and the
    (reweighted) linear prediction scores. ``beta = 0`` reduces exactly to
    ``assign_labels``.
    """
    B = alpha * (F @ Q)
    if beta != 0.0:
        B = B + beta * (row_weights[:, None] * (X.T @ P))
    return _one_hot_argmax(B)


def irls_row_weights(R, p, eps=None):
    """Reweighting diagonal for the row-robust loss: 1 / ((2/p) ||r_i||^(2-p)).

    ``eps`` floors the residual norms; by default it is 1e-8 of the mean row
    norm, so zero-residual rows stay finite. With p = 2 all weights are 1.
    """
    if not 0 < p <= 2:
        raise DataValidationError("loss exponent p must lie in (0, 2]")
    norms = np.linalg.norm(np.asarray(R, dtype=float), axis=1)
    if eps is None:
        mean = norms.mean()
        eps = 1e-8 * mean if mean > 0 else 1e-12
    if eps <= 0:
        raise DataValidationError("residual floor must be positive")
    diag = 1.0 / ((2.0 / p) * np.maximum(norms, eps) ** (2.0 - p))
    return IrlsWeights(diag=diag, epsilon_floor=float(eps))


def fit_ridge_predictor(X, row_weights, Y, gamma):
    """Weighted ridge solve for the linear predictor.

    Solves (X D X^T + gamma I) P = X D Y with D = diag(row_weights);
    ``gamma > 0`` guarantees the system is positive definite.
    """
    if gamma <= 0:
        raise DataValidationError("ridge weight gamma must be positive")
    w = np.asarray(row_weights, dtype=float)
    d = X.shape[0]
    Xw = X * w[None, :]
    A = Xw @ X.T + gamma * np.eye(d)
    cond = np.linalg.cond(A)
    if cond > 1e12:
        warnings.warn(f"ridge system is ill-conditioned (cond {cond:.2e})")
    P = scipy.linalg.solve(A, Xw @ Y, assume_a="pos")
    if STRICT_CHECKS:
        resid = A @ P - Xw @ Y
        assert np.linalg.norm(resid) <= 1e-8 * max(1.0, np.linalg.norm(Xw @ Y))
    return P
