"""Repeated position measurement of a free mass.

Closed-form contractive (twisted coherent) states, grid-based
wavefunction numerics, continuous measurement models, finite
operation measures with realizability dilations, and a repeated
measurement harness that evaluates the standard quantum limit and its
breach by contractive-state measurements.
"""

from .errors import (
    AliasingRisk,
    CompletenessViolation,
    ConfigError,
    DegenerateKraus,
    DomainError,
    FreemassError,
    GridTooNarrow,
    IncompatibleModel,
    InputError,
    NormalizationViolation,
    NotContractive,
    NumericalGuardError,
    UnknownOutcome,
    ZeroProbabilityOutcome,
    ZeroProbabilityReadout,
    ZeroProbabilitySet,
)
from .experiment import (
    CavesBoundReport,
    ExperimentConfig,
    ExperimentReport,
    SweepRow,
    caves_bound_check,
    load_config,
    monte_carlo_report,
    parse_config,
    predict,
    predictive_uncertainty_analytic,
    predictive_uncertainty_monte_carlo,
    read_state_csv,
    render_report,
    run_config,
    sweep_contraction,
    sweep_csv,
    write_state_csv,
    write_trial_log,
)
from .grid import (
    Grid,
    GridState,
    PositionSampler,
    auto_grid,
    discretize,
    free_evolve,
    gaussian_state,
    quadrature_moments,
    sample_position,
)
from .models import (
    ContractiveGLModel,
    ExactPositionEffect,
    GordonLouisellModel,
    NoiseKernel,
    SmearedPositionEffect,
    VonNeumannModel,
    check_unbiasedness,
    contractive_interaction,
    gl_posterior,
    gl_probability,
    interaction_posterior,
    interaction_readout_density,
    noise_kernel,
    precision,
    resolution,
    vn_joint_state,
    vn_posterior,
    vn_probability,
)
from .opmeasure import (
    DensityOperator,
    EffectMeasure,
    FiniteOperationMeasure,
    Realization,
    apply,
    check_weak_repeatability,
    choi_matrix,
    dilate,
    effect_measure,
    is_completely_positive,
    posterior,
    probability,
    random_operation_measure,
    realization_statistics,
    smeared_position_measure,
    subensemble_state,
    von_neumann_discrete,
)
from .tcs import (
    Moments,
    TCSParams,
    contraction_time,
    make_tcs,
    min_position_uncertainty,
    moments,
    params_from_xi,
    position_variance_at,
    sql_bound,
    wavefunction_at,
    xi,
)

__version__ = "0.1.0"
