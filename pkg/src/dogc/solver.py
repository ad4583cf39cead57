"""Alternating solvers for discrete optimal graph clustering.

``dogc_fit`` learns a row-stochastic similarity graph under an adaptive
rank-enforcement weight together with an orthonormal embedding, a rotation,
and a discrete indicator matrix. ``dogcos_fit`` additionally trains a robust
linear predictor so unseen samples can be labeled without re-running the
solver. Plain k-means and spectral clustering are provided as baselines.

Within one sweep the hyperparameters (per-row graph regularizer, rank
weight) are held fixed, every variable update minimizes its subproblem for
the *current* graph Laplacian, and the reweighting diagonal is refreshed
before each step that consumes it; this is what makes the per-sweep
objective decrease that ``objective_value`` measures hold to rounding.
"""
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import DataValidationError, SolverError
from .graph import (FeatureMatrix, FixedAffinity, SimilarityGraph,
                    connected_components, gaussian_affinity, laplacian,
                    pairwise_sq_distances, scatter_trace)
from . import updates as _upd
from .updates import (ContinuousLabels, DiscreteLabels, GraphHyperParams,
                      IrlsWeights, Predictor, ProjectionMatrix,
                      RotationMatrix, assign_labels,
                      assign_labels_combined, best_rotation,
                      exact_k_regularizer, fit_ridge_predictor,
                      irls_row_weights, adapt_rank_weight,
                      smallest_eigvecs, solve_similarity_row,
                      update_embedding, update_projection)

COMPONENT_TOL = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the fitting loops.

    ``relax_labels`` drops the discrete-label coupling and rounds the
    embedding by row-argmax after convergence; ``fixed_graph`` freezes the
    similarity graph at a k-nearest Gaussian-kernel initialization and skips
    graph learning. ``freeze_projection`` pins the subspace to the identity,
    and ``freeze_xi`` keeps the graph regularizer from initialization
    instead of refreshing it every sweep.
    """

    max_sweeps: int = 50
    tol: float = 1e-6
    seed: int = 0
    relax_labels: bool = False
    fixed_graph: bool = False
    freeze_projection: bool = False
    freeze_xi: bool = False
    graph_init: np.ndarray = None
    bandwidth_jitter: bool = True


def ablation_variant(relax_labels=False, fixed_graph=False, **kw):
    """Solver configuration for the reduced model variants.

    With both flags off the configuration is identical to the default fit.
    """
    return SolverOptions(relax_labels=relax_labels, fixed_graph=fixed_graph, **kw)


@dataclass
class SolverState:
    """Snapshot of all solver variables plus the objective bookkeeping.

    ``objective_trace[t]`` is the objective at the end of sweep t evaluated
    with the hyperparameters in effect during that sweep, and
    ``objective_pre_trace[t]`` is the same objective at the start of the
    sweep; the pair certifies the per-sweep decrease.
    """

    S: sp.csr_array
    F: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    hyper: GraphHyperParams
    xi_rows: np.ndarray
    P: np.ndarray = None
    D: np.ndarray = None
    p: float = 2.0
    mode: str = "dogc"
    relax_labels: bool = False
    fixed_graph: bool = False
    objective_trace: list = field(default_factory=list)
    objective_pre_trace: list = field(default_factory=list)
    iteration: int = 0
    rng_seed: int = 0
    rank_satisfied: bool = False

    def graph(self):
        return SimilarityGraph(weights=self.S, neighbor_count=self.hyper.k)

    def labels(self):
        source = self.F if self.relax_labels else self.Y
        return np.argmax(source, axis=1)

    def validate(self):
        """Run every component-type invariant plus the sweep-decrease check."""
        self.graph().validate()
        ContinuousLabels(self.F)
        if not self.relax_labels:
            DiscreteLabels(self.Y)
        RotationMatrix(self.Q)
        ProjectionMatrix(self.W)
        if self.P is not None:
            Predictor(self.P, p=self.p, gamma=max(self.hyper.gamma, 0.0))
        if self.D is not None:
            IrlsWeights(diag=self.D, epsilon_floor=1e-300)
        for pre, post in zip(self.objective_pre_trace, self.objective_trace):
            if post > pre + 1e-9 * max(1.0, abs(pre)):
                raise DataValidationError(
                    f"objective increased within a sweep: {pre} -> {post}")
        return self


@dataclass
class ClusteringResult:
    labels: np.ndarray
    state: SolverState
    converged: bool
    sweeps: int
    wall_time: float


def _as_array(X):
    return X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)


def _validate_problem(data, c, k):
    d, n = data.shape
    if not 2 <= c <= n:
        raise DataValidationError(f"need 2 <= c <= n, got c={c}, n={n}")
    distinct = np.unique(data, axis=1).shape[1]
    if distinct < c:
        raise SolverError(
            f"only {distinct} distinct samples for c={c} clusters; "
            "duplicate-collapsed data cannot realize the requested partition")
    if k is None:
        k = int(round(n / 10.0))
    k = int(min(max(k, 1), n - 2))
    return k


def _default_m(c, d, m):
    if m is None:
        return min(c, d)
    if not 1 <= m <= d:
        raise DataValidationError(f"need 1 <= m <= d, got m={m}, d={d}")
    return m


def row_stochastic_knn_affinity(data, k, bandwidth=None):
    """Gaussian affinity truncated to the k nearest neighbors per row and
    row-normalized; the fixed input graph of the frozen-graph variant."""
    A = gaussian_affinity(data, bandwidth).weights.copy()
    n = A.shape[0]
    order = np.argsort(-A, axis=1)
    S = np.zeros_like(A)
    rows = np.arange(n)[:, None]
    keep = order[:, :k]
    S[rows, keep] = A[rows, keep]
    sums = S.sum(axis=1, keepdims=True)
    sums[sums == 0] = 1.0
    return S / sums


def _initial_graph(data, k, rng, options):
    """Similarity initialization plus the regularizer bookkeeping."""
    n = data.shape[1]
    base = pairwise_sq_distances(data) / scatter_trace(data)
    if options.graph_init is not None:
        S = np.asarray(options.graph_init, dtype=float)
        if S.shape != (n, n):
            raise DataValidationError(f"graph_init must be {(n, n)}, got {S.shape}")
        xi, xi_rows = exact_k_regularizer(base, k)
        return S, xi, xi_rows
    if options.fixed_graph:
        S = row_stochastic_knn_affinity(data, k)
        xi, xi_rows = exact_k_regularizer(base, k)
        return S, xi, xi_rows
    xi, xi_rows = exact_k_regularizer(base, k)
    if options.bandwidth_jitter:
        factor = float(np.exp(rng.uniform(np.log(0.25), np.log(4.0))))
        xi_rows = xi_rows * factor
        xi = xi * factor
    S = np.zeros((n, n))
    for i in range(n):
        S[i] = solve_similarity_row(base[i], xi_rows[i], self_index=i)
    return S, xi, xi_rows


def _objective(data, S, L, F, Y, Q, W, P, xi_rows, lam, alpha, beta, gamma,
               p, mode, relax_labels):
    """Published objective at the current variables and hyperparameters."""
    XW = data.T @ W
    graph_term = 2.0 * float(np.sum(XW * (L @ XW))) / scatter_trace(data, W)
    reg_term = float(np.sum(xi_rows * np.sum(S * S, axis=1)))
    spectral_term = 2.0 * lam * float(np.sum(F * (L @ F)))
    val = graph_term + reg_term + spectral_term
    if not relax_labels:
        val += alpha * float(np.sum((Y - F @ Q) ** 2))
        if mode == "dogcos":
            R = Y - data.T @ P
            norms = np.linalg.norm(R, axis=1)
            val += beta * (float(np.sum(norms**p)) + gamma * float(np.sum(P * P)))
    return val


def objective_value(X, state, mode=None):
    """Objective of the stated mode at a solver state (robust-loss form,
    not the reweighted surrogate)."""
    data = _as_array(X)
    mode = mode or state.mode
    S = state.S.toarray() if sp.issparse(state.S) else np.asarray(state.S)
    L = laplacian(S).laplacian
    return _objective(data, S, L, state.F, state.Y, state.Q, state.W, state.P,
                      state.xi_rows, state.hyper.lam, state.hyper.alpha,
                      state.hyper.beta, state.hyper.gamma, state.p,
                      mode, state.relax_labels)


def _trivial_full_partition(data, c, k, m, alpha, beta, gamma, p, mode, options):
    """c == n: the only indicator with no empty cluster labels each point
    alone, so the search is vacuous."""
    n = data.shape[1]
    rng = np.random.default_rng(options.seed)
    S, xi, xi_rows = _initial_graph(data, k, rng, options)
    hyper = GraphHyperParams(k=k, xi=xi, lam=max(xi, 1e-12), alpha=alpha,
                             beta=beta, gamma=gamma)
    state = SolverState(S=sp.csr_array(S), F=np.eye(n), Y=np.eye(n),
                        Q=np.eye(n), W=np.eye(data.shape[0])[:, :m],
                        hyper=hyper, xi_rows=xi_rows, p=p, mode=mode,
                        rng_seed=options.seed)
    return ClusteringResult(labels=np.arange(n), state=state, converged=True,
                            sweeps=0, wall_time=0.0)


def _fit(data, c, k, alpha, beta, gamma, p, m, options, mode):
    start = time.perf_counter()
    d, n = data.shape
    k = _validate_problem(data, c, k)
    m = _default_m(c, d, m)
    if c == n:
        return _trivial_full_partition(data, c, k, m, alpha, beta, gamma, p,
                                       mode, options)
    if options.freeze_projection and m != d:
        m = d
    rng = np.random.default_rng(options.seed)

    S, xi, xi_rows = _initial_graph(data, k, rng, options)
    L = laplacian(S).laplacian
    F = smallest_eigvecs(L, c)
    Q = np.eye(c)
    # Row-argmax on raw eigenvectors is sign-ambiguous and collapses for
    # larger c; spread the initial indicator with a deterministic k-means
    # on the embedding rows instead.
    init_labels, _ = _lloyd(F, c, None, 50,
                            centers=_farthest_first_centers(F, c))
    Y = np.zeros((n, c))
    Y[np.arange(n), init_labels] = 1.0
    Q = best_rotation(F, Y)
    Y = assign_labels(F, Q)
    if options.freeze_projection or m == d:
        W = np.eye(d)
    else:
        W = smallest_eigvecs(data @ L @ data.T, m)
    lam = max(xi, 1e-12)
    P = np.zeros((d, c)) if mode == "dogcos" else None
    D = None

    pre_trace, post_trace = [], []
    prev_labels = None
    prev_obj = None
    converged = False
    components = connected_components(S, COMPONENT_TOL)[0]
    sweep = 0
    for sweep in range(1, options.max_sweeps + 1):
        proj = None if (options.freeze_projection or m == d) else W
        dwx = pairwise_sq_distances(data, proj) / scatter_trace(data, W)
        if not options.fixed_graph:
            df = pairwise_sq_distances(F.T)
            combined = dwx + lam * df
            if not options.freeze_xi:
                xi, xi_rows = exact_k_regularizer(combined, k)

        obj_pre = _objective(data, S, L, F, Y, Q, W, P, xi_rows, lam,
                             alpha, beta, gamma, p, mode, options.relax_labels)

        if not options.fixed_graph:
            for i in range(n):
                S[i] = solve_similarity_row(combined[i], xi_rows[i], self_index=i)
            L = laplacian(S).laplacian

        F = update_embedding(L, None if options.relax_labels else Y, Q,
                             0.0 if options.relax_labels else alpha, lam, F)
        if not (options.freeze_projection or m == d):
            W = update_projection(data, L, m, W)
        if not options.relax_labels:
            Q = best_rotation(F, Y)
            if mode == "dogcos":
                D = irls_row_weights(Y - data.T @ P, p).diag
                P = fit_ridge_predictor(data, D, Y, gamma)
                D = irls_row_weights(Y - data.T @ P, p).diag
                Y = assign_labels_combined(F, Q, data, P, D, alpha, beta)
            else:
                Y = assign_labels(F, Q)

        obj_post = _objective(data, S, L, F, Y, Q, W, P, xi_rows, lam,
                              alpha, beta, gamma, p, mode, options.relax_labels)
        pre_trace.append(obj_pre)
        post_trace.append(obj_post)
        if _upd.STRICT_CHECKS:
            assert obj_post <= obj_pre + 1e-9 * max(1.0, abs(obj_pre))

        components = connected_components(S, COMPONENT_TOL)[0]
        if not options.fixed_graph:
            lam, _ = adapt_rank_weight(components, c, lam)

        labels = np.argmax(F if options.relax_labels else Y, axis=1)
        stable = prev_labels is not None and np.array_equal(labels, prev_labels)
        flat = (prev_obj is not None
                and abs(obj_post - prev_obj) <= options.tol * max(1.0, abs(prev_obj)))
        prev_labels, prev_obj = labels, obj_post
        if stable and flat:
            converged = True
            break

    if options.relax_labels and mode == "dogcos":
        # The loop never forms an indicator, so fit the predictor afterwards
        # on the rounded embedding with a short reweighting fixed point.
        Y = np.zeros((n, c))
        Y[np.arange(n), np.argmax(F, axis=1)] = 1.0
        P = np.zeros((d, c))
        for _ in range(5):
            D = irls_row_weights(Y - data.T @ P, p).diag
            P = fit_ridge_predictor(data, D, Y, gamma)

    labels = np.argmax(F if options.relax_labels else Y, axis=1)
    if not options.relax_labels and len(np.unique(labels)) < c:
        warnings.warn(f"converged with {len(np.unique(labels))} of {c} "
                      "clusters occupied")

    hyper = GraphHyperParams(k=k, xi=xi, lam=lam, alpha=alpha,
                             beta=beta, gamma=gamma)
    state = SolverState(S=sp.csr_array(S), F=F, Y=Y, Q=Q, W=W, hyper=hyper,
                        xi_rows=xi_rows, P=P, D=D, p=p, mode=mode,
                        relax_labels=options.relax_labels,
                        fixed_graph=options.fixed_graph,
                        objective_trace=post_trace,
                        objective_pre_trace=pre_trace,
                        iteration=sweep, rng_seed=options.seed,
                        rank_satisfied=(components == c))
    return ClusteringResult(labels=labels, state=state,
                            converged=converged and components == c,
                            sweeps=sweep,
                            wall_time=time.perf_counter() - start)


def dogc_fit(X, c, k=None, alpha=1e-2, m=None, options=None):
    """Joint graph learning and discrete label optimization.

    Alternates similarity rows, the orthonormal embedding, the trace-ratio
    projection, the rotation, and the indicator until the labels stop
    changing and the objective is flat, adapting the rank weight each sweep
    toward exactly c connected components.
    """
    options = options or SolverOptions()
    return _fit(_as_array(X), c, k, alpha, 0.0, 0.0, 2.0, m, options, "dogc")


def dogcos_fit(X, c, k=None, alpha=1e-2, beta=1e-2, gamma=0.1, p=1.25,
               m=None, options=None):
    """Graph clustering with an additional robust linear predictor.

    The indicator is driven by both the rotated embedding and the reweighted
    prediction scores; the returned state carries the trained predictor for
    out-of-sample labeling. ``beta = 0`` with ``p = 2`` reproduces
    ``dogc_fit`` exactly.
    """
    options = options or SolverOptions()
    if not 0 < p <= 2:
        raise DataValidationError("loss exponent p must lie in (0, 2]")
    if gamma <= 0:
        raise DataValidationError("ridge weight gamma must be positive")
    return _fit(_as_array(X), c, k, alpha, beta, gamma, p, m, options, "dogcos")


def predict_out_of_sample(P, X_new):
    """Labels for unseen samples: row-argmax of the predictor scores.

    ``X_new`` must be preprocessed exactly like the training data.
    """
    mat = P.P if isinstance(P, Predictor) else np.asarray(P, dtype=float)
    data = _as_array(X_new)
    if data.shape[0] != mat.shape[0]:
        raise DataValidationError(
            f"predictor expects {mat.shape[0]} features, got {data.shape[0]}")
    return np.argmax(data.T @ mat, axis=1)


def _kmeans_pp_init(pts, c, rng):
    n = pts.shape[0]
    centers = np.empty((c, pts.shape[1]))
    centers[0] = pts[rng.integers(n)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for j in range(1, c):
        total = d2.sum()
        if total <= 0:
            centers[j] = pts[rng.integers(n)]
            continue
        centers[j] = pts[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((pts - centers[j]) ** 2, axis=1))
    return centers


def _farthest_first_centers(pts, c):
    """Deterministic seeding: start at the point farthest from the mean,
    then repeatedly take the point farthest from the chosen set."""
    chosen = [int(np.argmax(np.sum((pts - pts.mean(axis=0)) ** 2, axis=1)))]
    d2 = np.sum((pts - pts[chosen[0]]) ** 2, axis=1)
    for _ in range(1, c):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((pts - pts[nxt]) ** 2, axis=1))
    return pts[chosen].copy()


def _lloyd(pts, c, rng, max_iter, centers=None):
    n = pts.shape[0]
    if centers is None:
        centers = _kmeans_pp_init(pts, c, rng)
    labels = np.full(n, -1)
    inertia = np.inf
    for _ in range(max_iter):
        d2 = (np.sum(pts**2, axis=1)[:, None] - 2.0 * pts @ centers.T
              + np.sum(centers**2, axis=1)[None, :])
        new_labels = np.argmin(d2, axis=1)
        for j in range(c):
            if not np.any(new_labels == j):
                # Re-seed an empty cluster at the point farthest from its center.
                far = np.argmax(d2[np.arange(n), new_labels])
                centers[j] = pts[far]
                new_labels[far] = j
        for j in range(c):
            centers[j] = pts[new_labels == j].mean(axis=0)
        new_inertia = float(np.sum((pts - centers[new_labels]) ** 2))
        if _upd.STRICT_CHECKS:
            assert new_inertia <= inertia + 1e-9 * max(1.0, abs(inertia))
        if np.array_equal(new_labels, labels):
            inertia = new_inertia
            break
        labels, inertia = new_labels, new_inertia
    return labels, inertia


def kmeans(X, c, restarts=10, max_iter=300, seed=0, return_inertia=False):
    """Lloyd iterations from k-means++ seeding, best of ``restarts`` by
    within-cluster sum of squares."""
    pts = _as_array(X).T
    n = pts.shape[0]
    if not 1 <= c <= n:
        raise DataValidationError(f"need 1 <= c <= n, got c={c}, n={n}")
    if c == 1:
        labels = np.zeros(n, dtype=int)
        inertia = float(np.sum((pts - pts.mean(axis=0)) ** 2))
        return (labels, inertia) if return_inertia else labels
    best_labels, best_inertia = None, np.inf
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        labels, inertia = _lloyd(pts, c, rng, max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return (best_labels, best_inertia) if return_inertia else best_labels


def spectral_clustering(A, c, restarts=10, seed=0):
    """Embed with the c smallest Laplacian eigenvectors, then k-means."""
    if isinstance(A, FixedAffinity):
        A = A.weights
    L = laplacian(A).laplacian
    F = smallest_eigvecs(L, c)
    return kmeans(F.T, c, restarts=restarts, seed=seed)


def fit_restarts(fit, X, c, restarts=10, seed=0, select="best_objective",
                 truth=None, options=None, **kwargs):
    """Run independently seeded restarts of a fit and pick one.

    Restart r uses ``seed + r``. Selection is by final objective, or by
    clustering accuracy against ``truth`` when ``select='best_acc'`` (the
    oracle protocol used for benchmark parity). Returns
    ``(best_result, results)``.
    """
    if select == "best_acc" and truth is None:
        raise DataValidationError("best_acc selection requires ground truth")
    options = options or SolverOptions()
    results = []
    for r in range(restarts):
        results.append(fit(X, c, options=replace(options, seed=seed + r),
                           **kwargs))
    if select == "best_acc":
        from .metrics import accuracy
        scores = [accuracy(res.labels, truth) for res in results]
        best = int(np.argmax(scores))
    elif select == "best_objective":
        finals = [res.state.objective_trace[-1] if res.state.objective_trace
                  else np.inf for res in results]
        best = int(np.argmin(finals))
    else:
        raise DataValidationError(f"unknown selection rule {select!r}")
    return results[best], results
