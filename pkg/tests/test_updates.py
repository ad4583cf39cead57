"""Subproblem tests: every update is checked against an independent oracle
(bisection water-filling, SLSQP, grid search, brute-force enumeration,
stacked least squares) or a closed-form hand evaluation.
"""
import itertools
import warnings

import numpy as np
import pytest
import scipy.linalg
import scipy.optimize

from dogc.errors import DataValidationError
from dogc.updates import (ContinuousLabels, DiscreteLabels, GraphHyperParams,
                          IrlsWeights, ProjectionMatrix, RotationMatrix,
                          adapt_rank_weight, assign_labels,
                          assign_labels_combined, best_rotation,
                          embedding_objective, exact_k_regularizer,
                          fit_ridge_predictor, irls_row_weights,
                          project_simplex, smallest_eigvecs,
                          solve_similarity_row, trace_ratio,
                          update_embedding, update_projection)


def simplex_qp_oracle(d, xi):
    """Solve min sum d_j s_j + xi s_j^2 on the simplex by bisecting the
    water level of the stationarity condition; independent of the
    sorting-based projection used by the library."""
    v = -np.asarray(d, dtype=float) / (2.0 * xi)

    def mass(theta):
        return np.maximum(v - theta, 0.0).sum()

    lo, hi = v.min() - 1.0 / len(v) - 1.0, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


def simplex_slsqp_oracle(d, xi):
    v = -np.asarray(d, dtype=float) / (2.0 * xi)
    n = len(v)
    res = scipy.optimize.minimize(
        lambda s: np.sum((s - v) ** 2), np.full(n, 1.0 / n),
        jac=lambda s: 2.0 * (s - v), method="SLSQP",
        bounds=[(0.0, 1.0)] * n,
        constraints=[{"type": "eq", "fun": lambda s: s.sum() - 1.0}],
        options={"ftol": 1e-14, "maxiter": 300})
    return res.x


class TestSolveSimilarityRow:
    def test_equal_distances_give_uniform(self):
        s = solve_similarity_row(np.zeros(4), xi=1.0)
        np.testing.assert_allclose(s, 0.25)

    def test_tiny_xi_concentrates_on_nearest(self):
        s = solve_similarity_row(np.array([0.0, 1e6, 1e6]), xi=1e-6)
        np.testing.assert_allclose(s, [1.0, 0.0, 0.0], atol=1e-12)

    def test_matches_bisection_oracle(self, rng):
        for _ in range(50):
            n = int(rng.integers(3, 30))
            d = rng.uniform(0.0, 5.0, n)
            xi = float(rng.uniform(0.05, 3.0))
            s = solve_similarity_row(d, xi)
            np.testing.assert_allclose(s, simplex_qp_oracle(d, xi), atol=1e-8)

    def test_matches_slsqp_oracle(self, rng):
        for _ in range(10):
            d = rng.uniform(0.0, 4.0, 8)
            xi = float(rng.uniform(0.2, 2.0))
            s = solve_similarity_row(d, xi)
            np.testing.assert_allclose(s, simplex_slsqp_oracle(d, xi), atol=1e-6)

    def test_kkt_water_level_is_common(self, rng):
        # every positive entry satisfies s_j = -d_j/(2 xi) + eta for one eta
        d = rng.uniform(0.0, 3.0, 12)
        xi = 0.7
        s = solve_similarity_row(d, xi)
        pos = s > 0
        eta = s[pos] + d[pos] / (2 * xi)
        assert np.ptp(eta) < 1e-8
        assert s.sum() == pytest.approx(1.0, abs=1e-10)

    def test_self_index_and_inf_excluded(self):
        s = solve_similarity_row(np.array([5.0, 1.0, np.inf, 1.0]), 1.0,
                                 self_index=0)
        assert s[0] == 0.0 and s[2] == 0.0
        assert s.sum() == pytest.approx(1.0)

    def test_monotone_in_distance(self, rng):
        d = np.sort(rng.uniform(0.0, 2.0, 10))
        s = solve_similarity_row(d, 0.5)
        assert np.all(np.diff(s) <= 1e-12)

    def test_zero_xi_tie_warns(self):
        with pytest.warns(UserWarning, match="tie"):
            s = solve_similarity_row(np.array([1.0, 1.0, 2.0]), 0.0)
        np.testing.assert_allclose(s, [1.0, 0.0, 0.0])


class TestExactKRegularizer:
    def test_hand_evaluated_row(self):
        # row 0 has sorted neighbor distances (1, 2, 3); k=2 -> 3 - 1.5 = 1.5
        D = np.array([[0.0, 1.0, 2.0, 3.0],
                      [1.0, 0.0, 9.0, 9.0],
                      [2.0, 9.0, 0.0, 9.0],
                      [3.0, 9.0, 9.0, 0.0]])
        _, xi_rows = exact_k_regularizer(D, k=2)
        assert xi_rows[0] == pytest.approx(1.5)

    def test_duplicate_distances_floor_and_warn(self):
        D = np.full((4, 4), 5.0)
        np.fill_diagonal(D, 0.0)
        with pytest.warns(UserWarning, match="floor"):
            _, xi_rows = exact_k_regularizer(D, k=2)
        np.testing.assert_allclose(xi_rows, 1e-12)

    def test_rows_become_exactly_k_sparse(self, rng):
        from dogc.graph import pairwise_sq_distances
        for _ in range(20):
            X = rng.normal(size=(3, 12))
            D = pairwise_sq_distances(X)
            k = int(rng.integers(1, 10))
            _, xi_rows = exact_k_regularizer(D, k)
            for i in range(12):
                s = solve_similarity_row(D[i], xi_rows[i], self_index=i)
                assert int(np.sum(s > 0)) == k
                # and the oracle agrees on the solution itself
                d = D[i].copy()
                d[i] = np.inf
                np.testing.assert_allclose(
                    s[np.arange(12) != i],
                    simplex_qp_oracle(d[np.arange(12) != i], xi_rows[i]),
                    atol=1e-8)

    def test_rejects_bad_k(self, rng):
        D = np.abs(rng.normal(size=(5, 5)))
        with pytest.raises(DataValidationError):
            exact_k_regularizer(D, k=4)


class TestAdaptRankWeight:
    def test_too_few_components_doubles(self):
        assert adapt_rank_weight(1, 3, 1.0) == (2.0, False)

    def test_too_many_components_halves(self):
        assert adapt_rank_weight(5, 3, 1.0) == (0.5, False)

    def test_exact_count_is_fixed_point(self):
        assert adapt_rank_weight(3, 3, 7.0) == (7.0, True)


class TestUpdateEmbedding:
    def test_exact_fit_identity(self):
        n = 3
        F = update_embedding(np.zeros((n, n)), np.eye(n), np.eye(n),
                             alpha=1.0, rank_weight=1.0, F_init=np.eye(n))
        np.testing.assert_allclose(F, np.eye(n), atol=1e-10)

    def test_zero_laplacian_gives_polar_factor(self, rng):
        # SVD oracle: with no spectral term the solution is U V^T of Y Q^T
        Y = rng.normal(size=(8, 3))
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        F = update_embedding(np.zeros((8, 8)), Y, Q, alpha=0.7,
                             rank_weight=1.0, F_init=None)
        U, _, Vt = np.linalg.svd(Y @ Q.T, full_matrices=False)
        np.testing.assert_allclose(F, U @ Vt, atol=1e-10)

    def test_alpha_zero_matches_eigenvectors(self, rng):
        from dogc.graph import laplacian
        S = np.zeros((9, 9))
        for b in range(3):
            idx = slice(3 * b, 3 * b + 3)
            S[idx, idx] = rng.uniform(0.5, 1.0, (3, 3))
        np.fill_diagonal(S, 0.0)
        L = laplacian(S).laplacian
        F0 = np.linalg.qr(rng.normal(size=(9, 3)))[0]
        F = update_embedding(L, None, None, alpha=0.0, rank_weight=1.0,
                             F_init=F0)
        expected = smallest_eigvecs(L, 3)  # eigendecomposition oracle
        angles = scipy.linalg.subspace_angles(F, expected)
        assert np.max(angles) < 1e-6

    def test_monotone_and_feasible(self, rng, strict_updates):
        from dogc.graph import laplacian
        for _ in range(10):
            n, c = 12, 3
            L = laplacian(rng.uniform(size=(n, n))).laplacian
            Y = np.zeros((n, c))
            Y[np.arange(n), rng.integers(0, c, n)] = 1.0
            Q = np.linalg.qr(rng.normal(size=(c, c)))[0]
            F0 = np.linalg.qr(rng.normal(size=(n, c)))[0]
            alpha, lam = float(rng.uniform(0.01, 2)), float(rng.uniform(0.01, 2))
            F = update_embedding(L, Y, Q, alpha, lam, F0)
            ContinuousLabels(F)
            before = embedding_objective(L, Y, Q, alpha, lam, F0)
            after = embedding_objective(L, Y, Q, alpha, lam, F)
            assert after <= before + 1e-9 * max(1.0, abs(before))


class TestUpdateProjection:
    def test_full_width_returns_identity(self, rng):
        from dogc.graph import laplacian
        X = rng.normal(size=(3, 10))
        L = laplacian(rng.uniform(size=(10, 10))).laplacian
        W = update_projection(X, L, m=3, W_init=np.eye(3))
        np.testing.assert_allclose(W, np.eye(3))

    def test_zero_numerator_returns_init(self, rng):
        X = rng.normal(size=(4, 9))
        W0 = np.linalg.qr(rng.normal(size=(4, 2)))[0]
        W = update_projection(X, np.zeros((9, 9)), m=2, W_init=W0)
        np.testing.assert_allclose(W, W0)

    def test_two_dim_direction_beats_degree_grid(self, rng):
        # two elongated separable clusters; compare against a 1-degree grid
        from dogc.graph import laplacian, pairwise_sq_distances
        n_half = 15
        spread = rng.normal(size=n_half) * 3.0
        c1 = np.stack([spread, rng.normal(size=n_half) * 0.1 + 2.0])
        c2 = np.stack([spread, rng.normal(size=n_half) * 0.1 - 2.0])
        X = np.concatenate([c1, c2], axis=1)
        D = pairwise_sq_distances(X)
        sigma = np.sqrt(D.mean())
        S = np.exp(-D / (2 * sigma**2))
        np.fill_diagonal(S, 0.0)
        L = laplacian(S).laplacian
        W0 = np.linalg.qr(rng.normal(size=(2, 1)))[0]
        W = update_projection(X, L, m=1, W_init=W0)
        ProjectionMatrix(W)
        achieved = trace_ratio(X, L, W)
        thetas = np.deg2rad(np.arange(0.0, 180.0, 1.0))
        grid = [trace_ratio(X, L, np.array([[np.cos(t)], [np.sin(t)]]))
                for t in thetas]
        assert achieved <= min(grid) + 1e-4

    def test_sweeps_never_increase_ratio(self, rng, strict_updates):
        from dogc.graph import laplacian
        X = rng.normal(size=(6, 25))
        L = laplacian(rng.uniform(size=(25, 25))).laplacian
        W0 = np.linalg.qr(rng.normal(size=(6, 3)))[0]
        W = update_projection(X, L, m=3, W_init=W0)
        assert trace_ratio(X, L, W) <= trace_ratio(X, L, W0) + 1e-9


class TestBestRotation:
    def test_identity_when_already_aligned(self, rng):
        F = np.linalg.qr(rng.normal(size=(7, 3)))[0]
        np.testing.assert_allclose(best_rotation(F, F), np.eye(3), atol=1e-10)

    def test_recovers_known_rotation(self, rng):
        F = np.linalg.qr(rng.normal(size=(10, 4)))[0]
        Q0 = np.linalg.qr(rng.normal(size=(4, 4)))[0]
        Q = best_rotation(F, F @ Q0)
        np.testing.assert_allclose(Q, Q0, atol=1e-10)

    def test_two_dim_grid_oracle(self, rng):
        # exhaustive search over rotations and reflections at 1e-4 radians
        F = np.linalg.qr(rng.normal(size=(6, 2)))[0]
        Y = rng.normal(size=(6, 2))
        Q = best_rotation(F, Y)
        RotationMatrix(Q)
        achieved = np.sum((Y - F @ Q) ** 2)
        thetas = np.arange(0.0, 2 * np.pi, 1e-4)
        cos, sin = np.cos(thetas), np.sin(thetas)
        M = F.T @ Y
        # Tr(Q^T M) for rotations and for reflections, vectorized over theta
        rot = (M[0, 0] + M[1, 1]) * cos + (M[1, 0] - M[0, 1]) * sin
        ref = (M[0, 0] - M[1, 1]) * cos + (M[1, 0] + M[0, 1]) * sin
        const = np.sum(Y * Y) + 2.0  # ||F Q||^2 = c on the Stiefel manifold
        best_grid = const - 2.0 * max(rot.max(), ref.max())
        assert achieved <= best_grid + 1e-6

    def test_never_worse_than_identity(self, rng):
        for _ in range(20):
            F = np.linalg.qr(rng.normal(size=(8, 3)))[0]
            Y = rng.normal(size=(8, 3))
            Q = best_rotation(F, Y)
            assert (np.sum((Y - F @ Q) ** 2)
                    <= np.sum((Y - F) ** 2) + 1e-9)


class TestAssignLabels:
    def test_plain_argmax(self):
        F = np.array([[0.9, 0.1], [0.2, 0.8]])
        Y = assign_labels(F, np.eye(2))
        np.testing.assert_allclose(Y, [[1, 0], [0, 1]])

    def test_tie_goes_to_lowest_index(self):
        Y = assign_labels(np.array([[0.5, 0.5]]), np.eye(2))
        np.testing.assert_allclose(Y, [[1, 0]])

    def test_matches_row_enumeration(self, rng):
        # brute force over all one-hot rows minimizing ||Y - F Q||^2
        F = rng.normal(size=(6, 3))
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        Y = assign_labels(F, Q)
        G = F @ Q
        for i in range(6):
            costs = [np.sum((np.eye(3)[j] - G[i]) ** 2) for j in range(3)]
            assert np.argmax(Y[i]) == int(np.argmin(costs))

    def test_combined_reduces_to_plain_when_beta_zero(self, rng):
        F = rng.normal(size=(5, 3))
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        X = rng.normal(size=(4, 5))
        P = rng.normal(size=(4, 3))
        w = rng.uniform(0.5, 2.0, 5)
        Y0 = assign_labels(F, Q)
        Y1 = assign_labels_combined(F, Q, X, P, w, alpha=0.3, beta=0.0)
        np.testing.assert_allclose(Y0, Y1)

    def test_combined_alpha_zero_follows_prediction(self, rng):
        F = rng.normal(size=(5, 3))
        Q = np.eye(3)
        X = rng.normal(size=(4, 5))
        P = rng.normal(size=(4, 3))
        w = rng.uniform(0.5, 2.0, 5)
        Y = assign_labels_combined(F, Q, X, P, w, alpha=0.0, beta=0.9)
        expected = np.argmax(w[:, None] * (X.T @ P), axis=1)
        np.testing.assert_allclose(np.argmax(Y, axis=1), expected)

    def test_combined_matches_trace_enumeration(self, rng):
        # brute force over one-hot rows maximizing Tr(Y^T B)
        F = rng.normal(size=(6, 3))
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        X = rng.normal(size=(2, 6))
        P = rng.normal(size=(2, 3))
        w = rng.uniform(0.1, 3.0, 6)
        alpha, beta = 0.4, 0.7
        Y = assign_labels_combined(F, Q, X, P, w, alpha, beta)
        B = alpha * F @ Q + beta * w[:, None] * (X.T @ P)
        best = -np.inf
        for combo in itertools.product(range(3), repeat=6):
            cand = np.zeros((6, 3))
            cand[np.arange(6), combo] = 1.0
            best = max(best, np.sum(cand * B))
        assert np.sum(Y * B) == pytest.approx(best)


class TestIrlsWeights:
    def test_p_two_gives_unit_weights(self, rng):
        R = rng.normal(size=(7, 3))
        w = irls_row_weights(R, p=2.0)
        np.testing.assert_allclose(w.diag, 1.0)

    def test_hand_value_p_one(self):
        R = np.array([[0.3, 0.4]])  # row norm 0.5
        w = irls_row_weights(R, p=1.0)
        assert w.diag[0] == pytest.approx(1.0)  # 1 / (2 * 0.5)

    def test_zero_residual_hits_floor(self):
        R = np.zeros((2, 3))
        w = irls_row_weights(R, p=1.0, eps=0.1)
        np.testing.assert_allclose(w.diag, 1.0 / (2 * 0.1))

    def test_rejects_bad_exponent(self):
        with pytest.raises(DataValidationError):
            irls_row_weights(np.ones((2, 2)), p=0.0)
        with pytest.raises(DataValidationError):
            irls_row_weights(np.ones((2, 2)), p=2.5)


class TestFitRidgePredictor:
    def test_large_ridge_shrinks_to_zero(self, rng):
        X = rng.normal(size=(4, 10))
        Y = rng.normal(size=(10, 2))
        P = fit_ridge_predictor(X, np.ones(10), Y, gamma=1e12)
        np.testing.assert_allclose(P, 0.0, atol=1e-9)

    def test_identity_design_recovers_targets(self):
        n = 5
        Y = np.eye(n)[:, :2]
        P = fit_ridge_predictor(np.eye(n), np.ones(n), Y, gamma=1e-10)
        np.testing.assert_allclose(P, Y, atol=1e-8)

    def test_matches_stacked_least_squares_oracle(self, rng):
        d, n, c = 5, 8, 3
        X = rng.normal(size=(d, n))
        Y = rng.normal(size=(n, c))
        w = rng.uniform(0.2, 2.0, n)
        gamma = 0.3
        P = fit_ridge_predictor(X, w, Y, gamma)
        A = np.vstack([np.sqrt(w)[:, None] * X.T, np.sqrt(gamma) * np.eye(d)])
        b = np.vstack([np.sqrt(w)[:, None] * Y, np.zeros((d, c))])
        expected = np.linalg.lstsq(A, b, rcond=None)[0]
        rel = np.linalg.norm(P - expected) / np.linalg.norm(expected)
        assert rel < 1e-8

    def test_normal_equations_residual(self, rng):
        X = rng.normal(size=(6, 12))
        Y = rng.normal(size=(12, 4))
        w = rng.uniform(0.1, 1.0, 12)
        gamma = 0.05
        P = fit_ridge_predictor(X, w, Y, gamma)
        Xw = X * w[None, :]
        lhs = (Xw @ X.T + gamma * np.eye(6)) @ P
        rhs = Xw @ Y
        assert (np.linalg.norm(lhs - rhs)
                <= 1e-8 * max(1.0, np.linalg.norm(rhs)))

    def test_rejects_nonpositive_gamma(self, rng):
        with pytest.raises(DataValidationError):
            fit_ridge_predictor(np.ones((2, 3)), np.ones(3), np.ones((3, 2)), 0.0)


class TestDomainTypes:
    def test_orthonormality_enforced(self, rng):
        with pytest.raises(DataValidationError):
            ContinuousLabels(rng.normal(size=(5, 2)) * 3)
        with pytest.raises(DataValidationError):
            RotationMatrix(np.array([[1.0, 0.0], [1.0, 1.0]]))

    def test_indicator_rows(self):
        with pytest.raises(DataValidationError):
            DiscreteLabels(np.array([[1.0, 1.0], [0.0, 1.0]]))
        labels = DiscreteLabels(np.array([[0.0, 1.0], [1.0, 0.0]])).labels
        np.testing.assert_array_equal(labels, [1, 0])

    def test_hyper_params_validated(self):
        with pytest.raises(DataValidationError):
            GraphHyperParams(k=0)
        with pytest.raises(DataValidationError):
            GraphHyperParams(k=3, lam=0.0)
        with pytest.raises(DataValidationError):
            IrlsWeights(diag=np.array([0.0, 1.0]), epsilon_floor=1e-8)
