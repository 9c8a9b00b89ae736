"""Networked information aggregation: sequential logit-passing agents on DAGs.

Agents arranged in a DAG each observe a subset of the feature columns, fit a
logistic model on those columns plus their parents' logit columns, and pass
their own logits on. The package provides the protocol engine, the
numerically stable logistic solver behind it, KL-based loss-gap diagnostics
and bound calculators, generators for a chained-latent hard instance with
closed-form analytics, and a CLI for reproducible experiments.
"""

from .data import Dataset
from .errors import (
    CycleDetected,
    DimensionMismatch,
    DomainError,
    IndexOutOfRange,
    InvalidConfig,
    InvalidDimension,
    LengthMismatch,
    MissingParent,
    NiaError,
    NonFinite,
    NotAPath,
    NotConvergedWarning,
    QuadratureFailure,
)
from .graph import (
    AgentGraph,
    CoverageResult,
    build_agent_graph,
    check_m_coverage,
    cyclic_path_assignment,
)
from .instances import (
    HardInstanceSpec,
    NoiseComparison,
    PassPredictor,
    generate_hard_instance,
    noise_monotonicity_check,
    optimal_pass_coefficients,
    optimal_scaling_factor,
    predicted_excess_curve,
    relevance_set,
    scaling_gradient,
    sigmoid_moment,
)
from .logistic import (
    FitOptions,
    FitResult,
    bce_loss,
    fit_logistic,
    predict_logits,
    residual_moments,
    sigmoid,
    stable_softplus,
)
from .metrics import (
    StableBlock,
    TheoryReport,
    bernoulli_kl,
    bernoulli_kl_pointwise,
    build_theory_report,
    convergence_bound_rhs,
    expected_kl,
    expected_kl_from_logits,
    feature_second_moment_bound,
    pinsker_gap,
    residual_bound_rhs,
    stable_block,
    verify_decomposition,
)
from .protocol import (
    AgentModel,
    ProtocolTrace,
    agent_design,
    run_protocol,
    sink_excess_loss,
)

__version__ = "0.1.0"

__all__ = [
    "AgentGraph",
    "AgentModel",
    "CoverageResult",
    "CycleDetected",
    "Dataset",
    "DimensionMismatch",
    "DomainError",
    "FitOptions",
    "FitResult",
    "HardInstanceSpec",
    "IndexOutOfRange",
    "InvalidConfig",
    "InvalidDimension",
    "LengthMismatch",
    "MissingParent",
    "NiaError",
    "NoiseComparison",
    "NonFinite",
    "NotAPath",
    "NotConvergedWarning",
    "PassPredictor",
    "ProtocolTrace",
    "QuadratureFailure",
    "StableBlock",
    "TheoryReport",
    "agent_design",
    "bce_loss",
    "bernoulli_kl",
    "bernoulli_kl_pointwise",
    "build_agent_graph",
    "build_theory_report",
    "check_m_coverage",
    "convergence_bound_rhs",
    "cyclic_path_assignment",
    "expected_kl",
    "expected_kl_from_logits",
    "feature_second_moment_bound",
    "fit_logistic",
    "generate_hard_instance",
    "noise_monotonicity_check",
    "optimal_pass_coefficients",
    "optimal_scaling_factor",
    "pinsker_gap",
    "predict_logits",
    "predicted_excess_curve",
    "relevance_set",
    "residual_bound_rhs",
    "residual_moments",
    "run_protocol",
    "scaling_gradient",
    "sigmoid",
    "sigmoid_moment",
    "sink_excess_loss",
    "stable_block",
    "stable_softplus",
    "verify_decomposition",
]
