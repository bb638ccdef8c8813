"""Numerical laboratory for randomly perturbed averaging operators.

The package computes random Fourier-Stieltjes kernels, centered exponential
sums with certified suprema, averaging operators applied exactly to
trigonometric observables on the torus, variation norms, and the seeded
Monte Carlo experiments that probe their convergence behavior.
"""

from .averages import (
    AverageFamily,
    MoriczReport,
    SeriesState,
    SquareFunctionResult,
    apply_average,
    exponential_indices,
    kernel_value,
    kernel_values,
    moricz_check,
    series_increment_norm,
    series_partial_sum,
    series_window_norms,
    square_function,
)
from .errors import ConfigurationError, ErgolabError, ParameterError, RangeError, SizeError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentResult,
    ValidationReport,
    default_config,
    run_experiment,
    validate_config,
    write_outputs,
)
from .kernels import (
    EvalPoints,
    GridSpec,
    KernelEvaluator,
    RatioStatistic,
    SupResult,
    decay_profile,
    partial_sum_reference,
    partial_sum_transform,
    ratio_statistic,
    sup_on_grid,
)
from .measures import (
    AtomicMeasure,
    SmoothingKernel,
    TransitionMeasureModel,
    expected_transform,
    expected_transform_info,
    fourier_stieltjes,
    realize_measure,
    truncated_transform,
    variation_mass,
)
from .perturbations import (
    GrowthFunction,
    PerturbationSpec,
    SubsequenceSpec,
    TailReport,
    check_tail_condition,
    sample_delta,
    subsequence_values,
)
from .stats import mann_kendall_increasing, percentile, sample_points
from .torus import (
    SpectralMeasure,
    TorusObservable,
    apply_multiplier,
    evaluate,
    loglog_moment,
    logpsi_moment,
    spectral_measure,
)
from .variation import variation_block_bound, variation_bruteforce, variation_norm

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure",
    "AverageFamily",
    "ConfigurationError",
    "ErgolabError",
    "EvalPoints",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentResult",
    "GridSpec",
    "GrowthFunction",
    "KernelEvaluator",
    "MoriczReport",
    "ParameterError",
    "PerturbationSpec",
    "RangeError",
    "RatioStatistic",
    "SeriesState",
    "SizeError",
    "SmoothingKernel",
    "SpectralMeasure",
    "SquareFunctionResult",
    "SubsequenceSpec",
    "SupResult",
    "TailReport",
    "TorusObservable",
    "TransitionMeasureModel",
    "ValidationReport",
    "apply_average",
    "apply_multiplier",
    "check_tail_condition",
    "decay_profile",
    "default_config",
    "evaluate",
    "expected_transform",
    "expected_transform_info",
    "exponential_indices",
    "fourier_stieltjes",
    "kernel_value",
    "kernel_values",
    "loglog_moment",
    "logpsi_moment",
    "mann_kendall_increasing",
    "moricz_check",
    "partial_sum_reference",
    "partial_sum_transform",
    "percentile",
    "ratio_statistic",
    "realize_measure",
    "run_experiment",
    "sample_delta",
    "sample_points",
    "series_increment_norm",
    "series_partial_sum",
    "series_window_norms",
    "spectral_measure",
    "square_function",
    "subsequence_values",
    "sup_on_grid",
    "truncated_transform",
    "validate_config",
    "variation_block_bound",
    "variation_bruteforce",
    "variation_mass",
    "variation_norm",
    "write_outputs",
]
