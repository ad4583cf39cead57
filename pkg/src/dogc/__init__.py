"""Discrete optimal graph clustering.

Joint learning of a structured similarity graph (forced to exactly c
connected components through an adaptive spectral penalty), an orthonormal
label embedding, and a discrete cluster indicator obtained through an
orthogonal rotation instead of k-means rounding; optionally a robust linear
predictor for labeling unseen samples. Includes k-means and spectral
baselines, Hungarian-matched accuracy / NMI / purity metrics, dataset
tooling, and a benchmark CLI.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DataValidationError, DatasetParseError,
                     DogcError, SolverError)
from .graph import (FeatureMatrix, FixedAffinity, LaplacianPair,
                    SimilarityGraph, connected_components,
                    component_count_from_spectrum, gaussian_affinity,
                    laplacian, pairwise_sq_distances)
from .updates import (ContinuousLabels, DiscreteLabels, GraphHyperParams,
                      IrlsWeights, Predictor, ProjectionMatrix,
                      RotationMatrix, adapt_rank_weight, assign_labels,
                      assign_labels_combined, best_rotation,
                      exact_k_regularizer, fit_ridge_predictor,
                      irls_row_weights, project_simplex,
                      solve_similarity_row, update_embedding,
                      update_projection)
from .solver import (ClusteringResult, SolverOptions, SolverState,
                     ablation_variant, dogc_fit, dogcos_fit, fit_restarts,
                     kmeans, objective_value, predict_out_of_sample,
                     spectral_clustering)
from .checkpoint import load_state, save_state
from .metrics import ContingencyTable, accuracy, nmi, purity
from .data import (DatasetSpec, SyntheticConfig, Standardizer,
                   fit_standardizer, generate_synthetic, load_dataset,
                   save_dataset, standardize, train_test_split,
                   uci_dataset_spec, verify_datasets)
