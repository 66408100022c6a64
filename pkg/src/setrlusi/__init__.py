"""Stochastic ensemble multi-source transfer learning with statistical
invariants: weak conditional-probability learners fitted in closed form
against a dominance-weighted quadratic, boosted over random predicates,
source subsamples, and target bootstraps."""

from ._backend import active_backend
from .datasets import (
    CsvSchema,
    DomainDataset,
    SyntheticSpec,
    TransferTask,
    gen_synthetic_domains,
    kmeans_cluster,
    load_csv_dataset,
    make_transfer_task,
    minmax_scale_task,
    split_labeled_target,
    twelve_domain_spec,
)
from .ensemble import (
    Ensemble,
    TrainConfig,
    TrainingError,
    ensemble_predict,
    train_setrlusi,
    weak_error,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    emit_results,
    load_config,
    read_results,
    run_experiment,
)
from .linalg import (
    KernelConfig,
    VMatrix,
    compute_v_matrix,
    rbf_kernel_matrix,
    solve_symmetric_system,
)
from .predicates import (
    PoolConfig,
    PredicateKind,
    PredicateSpec,
    build_predicate_pool,
    evaluate_predicate,
    train_linear_margin_classifier,
)
from .sampling import (
    RngStream,
    bootstrap_target,
    draw_predicate,
    proportional_sample_source,
)
from .stats import friedman_statistic, nemenyi_cd
from .weak_learner import (
    FitError,
    HyperParams,
    WeakLearner,
    fit_weak_learner,
    objective_value,
    predict_proba,
)

__version__ = "0.1.0"

__all__ = [
    "active_backend",
    "CsvSchema",
    "DomainDataset",
    "SyntheticSpec",
    "TransferTask",
    "gen_synthetic_domains",
    "kmeans_cluster",
    "load_csv_dataset",
    "make_transfer_task",
    "minmax_scale_task",
    "split_labeled_target",
    "twelve_domain_spec",
    "Ensemble",
    "TrainConfig",
    "TrainingError",
    "ensemble_predict",
    "train_setrlusi",
    "weak_error",
    "ExperimentConfig",
    "ExperimentResult",
    "emit_results",
    "load_config",
    "read_results",
    "run_experiment",
    "KernelConfig",
    "VMatrix",
    "compute_v_matrix",
    "rbf_kernel_matrix",
    "solve_symmetric_system",
    "PoolConfig",
    "PredicateKind",
    "PredicateSpec",
    "build_predicate_pool",
    "evaluate_predicate",
    "train_linear_margin_classifier",
    "RngStream",
    "bootstrap_target",
    "draw_predicate",
    "proportional_sample_source",
    "friedman_statistic",
    "nemenyi_cd",
    "FitError",
    "HyperParams",
    "WeakLearner",
    "fit_weak_learner",
    "objective_value",
    "predict_proba",
]
