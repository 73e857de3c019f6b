"""Joint estimation of multiple Gaussian graphical models.

Estimates K precision matrices over a shared covariate set by node-wise
multi-task iterative hard thresholding, with per-node tuning of the
cross-dataset sharing level, plug-in inference for selected entries, a
synthetic benchmark harness, and a quadratic discriminant classifier.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateCovariate,
    DimensionMismatch,
    EmptyClassSplit,
    ExactFit,
    InvalidSpec,
    IterationCapExceeded,
    MightError,
    NonFinite,
    NonRepairableMatrix,
    SingularSubmatrix,
    SupportTooLarge,
    TooFewObservations,
)
from .model import (
    CoefficientStack,
    DatasetCollection,
    JointPrecision,
    Moments,
    ScaledDesign,
    build_node_problem,
    empirical_moments,
    recover_precision_column,
    validate,
)
from .thresholding import element_threshold, group_threshold, two_step_threshold
from .solver import (
    SolverConfig,
    SolveTrace,
    default_s0_grid,
    gradient_step,
    solve,
    tune_s0,
)
from .estimator import (
    NodeTrace,
    SupportSummary,
    estimate,
    support_sets,
    symmetrize,
)
from .inference import (
    InferenceEntry,
    InferenceResult,
    variance_estimate,
    z_scores,
)
from .simbench import (
    EntryNormality,
    ExperimentSpec,
    GroundTruth,
    MetricReport,
    NormalityReport,
    ReplicationTable,
    generate_truth,
    ks_against_normal,
    metrics,
    normality_study,
    run_experiment,
    sample_data,
    spec_with,
)
from .qda import (
    ClassificationReport,
    QDAModel,
    classify,
    decision_scores,
    evaluate,
    fit_qda,
    stratified_split,
)

__all__ = [name for name in dir() if not name.startswith("_")]
