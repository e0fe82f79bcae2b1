"""Numerical laboratory for discrete homogeneous polynomial chaos processes."""

from .analysis import (
    C_g_quadrature,
    QuadratureSpec,
    VarianceTable,
    bound_diff_constant,
    cancelling_kernel,
    cg_closed_form,
    covariance_gamma,
    covariance_sequence,
    exact_variance,
    linear_case_table,
    partial_sum_variance,
    variance_ratio_table,
)
from .errors import *  # noqa: F401,F403
from .forms import (
    CriterionReport,
    clt_criterion_report,
    contract,
    contraction_norm,
    eval_form,
    field_criterion_report,
    inner_product,
)
from .kernels import (
    CoefficientField,
    MemoryRegime,
    PowerKernelSpec,
    SymmetricKernel,
    classify_regime,
    horizon_for_tolerance,
    partial_sum_kernel,
    tail_mass_bound,
    validate_exponents,
)
from .montecarlo import (
    InnovationSpec,
    NormalityReport,
    fdd_covariance_check,
    moment_ratio_diagnostic,
    normality_report,
    replicate_endpoint,
    replicate_partial_sums,
    sample_innovations,
    universality_compare,
)
from .process import (
    ChaosPath,
    PathConfig,
    fast_path_product_kernel,
    normalization_factor,
    partial_sum_process,
    simulate_path,
)

__version__ = "0.1.0"
