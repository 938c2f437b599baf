"""Pseudospectral laboratory for the stochastic Burgers / KPZ / heat triple on the circle."""

from sbelab.chaos import (
    ChaosKernel2,
    IbpResult,
    PairingExponential,
    PairingMonomial,
    apply_L0,
    contract,
    evaluate_W2,
    evaluate_W2_batch,
    g_kernel,
    g_pairing_constant,
    grid_variance_constant,
    h1_norm,
    hermite,
    hminus1_norm,
    k_constant,
    mc_ibp_residual,
    random_symmetric_kernel,
    solve_resolvent,
    wick_square,
)
from sbelab.colehopf import (
    EXP_GUARD,
    DriftRegression,
    MassObserver,
    RemainderAccumulator,
    drift_slope,
    exp_height,
    gradient_gap,
    height_qv_density,
    q_process,
    r_process,
    remainder_observers,
    smoothed_height,
)
from sbelab.experiments import (
    EXPERIMENT_NAMES,
    ExperimentResult,
    ExperimentSpec,
    ScalarResult,
    Table,
    default_settings,
    run_experiment,
)
from sbelab.pathstats import (
    CauchyRate,
    HolderEstimate,
    LawTestReport,
    QvEstimate,
    ScalarPath,
    holder_exponent,
    law_test_functions,
    nonlinearity_cauchy_rate,
    p_variation,
    quadratic_variation,
    white_noise_law_test,
    wick_drift_pairing,
)
from sbelab.simulate import (
    CFL_GUARD,
    DEFAULT_MOLLIFIER,
    HEIGHT_DRIFT_CONSTANT,
    EnsembleSummary,
    NoiseTables,
    NormalizedParameters,
    PathRecord,
    SbeStepRecord,
    SimConfig,
    StateView,
    StochasticIncrements,
    initial_state,
    kpz_height_step,
    make_noise_tables,
    normalize_parameters,
    ou_step_exact,
    run_coupled,
    run_ensemble,
    sample_noise_increments,
    sbe_step,
    she_step,
)
from sbelab.spectral import (
    Mollifier,
    SpectralField,
    TorusGrid,
    derivative,
    inner,
    integrate_theta,
    mollify,
    norm_l2_sq,
    pointwise_product,
    sample_white_noise,
    variance_constant,
)

__version__ = "0.1.0"
