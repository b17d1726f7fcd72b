"""selfex: simulation and moment verification for SDE-driven self-exciting
jump processes, with a square-root-diffusion reference engine for scaling
limits."""

from .cir import (
    CirParams,
    GammaLaw,
    cir_euler_samples,
    cir_joint_moments,
    cir_marginal,
    cir_moments,
    cir_sample_euler,
)
from .jumps import (
    ConstantJumps,
    GammaJumps,
    IntensityShiftedJumps,
    InverseGaussianJumps,
)
from .linear_moments import (
    LinearMomentParams,
    closed_form_discrepancy,
    covariance_intensity,
    mean_integrated,
    mean_intensity,
    moment_ode_system,
    second_moment_integrated,
    second_moment_intensity,
    variance_intensity,
)
from .model import (
    LinearDrift,
    ModelSpec,
    NonlinearDrift,
    Regime,
    ValidatedModel,
    classify_regime,
    interjump_flow,
    validate_model,
)
from .scaling import (
    ConvergenceReport,
    DetLimitReport,
    ScalingFamily,
    convergence_experiment_integrated,
    convergence_experiment_intensity,
    deterministic_limit_experiment,
    gamma_family,
    run_convergence_suite,
)
from .stats import empirical_moments, ks_distance, poisson_gof
from .thinning import (
    EnsembleSummary,
    Path,
    SimConfig,
    dominating_bound,
    simulate_ensemble,
    simulate_path,
)

__version__ = "0.1.0"
