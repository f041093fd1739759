"""Classifiers trained from labels that name a class each example is not.

The pieces compose left to right: build or estimate a class-transition
matrix (transition, estimator), draw complementary labels (datakit), train
a softmax scorer against the matrix-corrected loss (model, trainer), and
check the stack's claims with fixed-seed suites and brute-force oracles
(oracle, harness).  The cli module exposes the same flows as subcommands.
"""

from .datakit import (
    CompDataset,
    LabeledDataset,
    class_posterior,
    corrupt,
    load_comp_csv,
    load_csv,
    load_idx,
    make_blobs,
    save_csv,
    standardize,
)
from .errors import (
    ComplabError,
    DivergenceError,
    EmptyAnchorClass,
    GridTooCoarse,
    UsageError,
    ValidationError,
)
from .estimator import (
    AnchorSet,
    QEstimate,
    estimate_q,
    fit_comp_predictor,
    project_rows,
    q_error,
)
from .harness import (
    ExperimentSpec,
    run_estimation,
    run_experiment,
    run_learning_curve,
    run_verify,
)
from .model import (
    SoftmaxModel,
    corrected_output,
    grad_check,
    load_checkpoint,
    loss_grad_h,
    modified_loss,
    save_checkpoint,
    softmax,
)
from .oracle import (
    DiscreteProblem,
    brute_force_minimizer,
    conditional_risk,
    make_random_invertible_problem,
    simplex_lattice,
)
from .trainer import TrainConfig, TrainReport, evaluate, train
from .transition import (
    BiasRegime,
    InvertibilityReport,
    TransitionMatrix,
    check_invertible,
    flip_posterior,
    load_singular_fixture,
    make_uniform,
    make_with_zero,
    make_without_zero,
    sample_complementary,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "BiasRegime",
    "CompDataset",
    "ComplabError",
    "DiscreteProblem",
    "DivergenceError",
    "EmptyAnchorClass",
    "ExperimentSpec",
    "GridTooCoarse",
    "InvertibilityReport",
    "LabeledDataset",
    "QEstimate",
    "SoftmaxModel",
    "TrainConfig",
    "TrainReport",
    "TransitionMatrix",
    "UsageError",
    "ValidationError",
    "brute_force_minimizer",
    "check_invertible",
    "class_posterior",
    "conditional_risk",
    "corrected_output",
    "corrupt",
    "estimate_q",
    "evaluate",
    "fit_comp_predictor",
    "flip_posterior",
    "grad_check",
    "load_checkpoint",
    "load_comp_csv",
    "load_csv",
    "load_idx",
    "load_singular_fixture",
    "loss_grad_h",
    "make_blobs",
    "make_random_invertible_problem",
    "make_uniform",
    "make_with_zero",
    "make_without_zero",
    "modified_loss",
    "project_rows",
    "q_error",
    "run_estimation",
    "run_experiment",
    "run_learning_curve",
    "run_verify",
    "sample_complementary",
    "save_checkpoint",
    "save_csv",
    "simplex_lattice",
    "softmax",
    "standardize",
    "train",
]
