"""Freezing Markov chains: simulation, scaling limits and verification."""

from .generators import (
    Connectivity,
    GeneratorMatrix,
    complete_graph_generator,
    generator_from_dict,
    generator_from_json,
    poisson_residual,
    poisson_solution,
    spectral_gap,
    spectral_gap_stochastic,
    stationary_distribution,
    validate_generator,
)
from .schedules import (
    ConstantPlus,
    Critical,
    FreezingSchedule,
    LogPower,
    PowerLaw,
    Regime,
    RegimeReport,
    RemainderSpec,
    Tabulated,
    ZERO_REMAINDER,
    as_rate_ell,
    classify,
    fluctuation_envelope_exponent,
    gamma_alpha,
    lambda_rate,
    nonstandard_rate_bound,
    p_at,
    schedule_from_dict,
    upsilon,
)
from .chain import (
    ChainEnsemble,
    ChainResult,
    ChainState,
    InterpolatedPath,
    empirical_update,
    fluctuation,
    interpolate,
    log_checkpoints,
    run_ensemble,
    simulate_chain,
    transition_row,
    weighted_occupation,
)
from .zigzag import (
    CouplingRecord,
    EZZPath,
    EZZState,
    coupled_ezz_d2,
    coupled_ezz_general,
    d2_wasserstein_bound,
    ezz_ensemble,
    flow,
    rescale_path,
    sample_at,
    simulate_ezz,
)
from .ou import (
    GaussianSpec,
    SigmaSpec,
    chain_fluctuation_sigma,
    ou_contraction_check,
    ou_exact_step,
    psd_sqrt,
    sigma_complete_graph,
    sigma_matrix,
    stationary_sample,
    w1_point_to_normal,
)
from .limits import (
    BetaMixtureSpec,
    DirichletMixtureSpec,
    PhiCandidate,
    TurnoverSpecs,
    beta_mixture_d2,
    dirichlet_mixture,
    interior_simplex_points,
    pde_residual,
    phi_complete_graph,
    turnover_specs,
)
from .stats import (
    KSResult,
    MomentReport,
    RateFit,
    SampleSet,
    ks_statistic,
    moment_report,
    rate_fit,
    sliced_wasserstein,
    wasserstein1_1d,
)

__version__ = "0.1.0"
