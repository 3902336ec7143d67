"""Semiparametric contextual bandits: policies, environments, harness."""

__version__ = "0.1.0"

from .core import (
    Decision,
    Feedback,
    Policy,
    RoundContext,
    instant_regret,
    make_round,
    optimal_arm,
)
from .linalg import PsdState, cholesky, psd_init, sample_mvn
from .gbose import (
    EstimatorState,
    GboseConfig,
    GbosePolicy,
    build_distribution,
    concentration_gamma,
    filter_actions,
    select_pair,
    theoretical_gamma,
    theoretical_lambda,
)
from .baselines import ActionCenteredTsPolicy, LinTsPolicy, SemiTsPolicy, TsConfig
from .envs import (
    ConfigurationError,
    Environment,
    EnvironmentSpec,
    confounder_value,
    gen_mu,
    register_confounder,
)
from .harness import (
    AggregateBand,
    ExperimentConfig,
    PolicySpec,
    RegretCurve,
    SweepResult,
    aggregate_band,
    best_bands,
    default_gamma_grid,
    paper_config,
    register_policy_kind,
    run_episode,
    run_sweep,
    select_best_gamma,
    write_results,
)
from .plotting import render_figures

__all__ = [
    "ActionCenteredTsPolicy",
    "AggregateBand",
    "ConfigurationError",
    "Decision",
    "Environment",
    "EnvironmentSpec",
    "EstimatorState",
    "ExperimentConfig",
    "Feedback",
    "GboseConfig",
    "GbosePolicy",
    "LinTsPolicy",
    "Policy",
    "PolicySpec",
    "PsdState",
    "RegretCurve",
    "RoundContext",
    "SemiTsPolicy",
    "SweepResult",
    "TsConfig",
    "aggregate_band",
    "best_bands",
    "build_distribution",
    "cholesky",
    "concentration_gamma",
    "confounder_value",
    "default_gamma_grid",
    "filter_actions",
    "gen_mu",
    "instant_regret",
    "make_round",
    "optimal_arm",
    "paper_config",
    "psd_init",
    "register_confounder",
    "register_policy_kind",
    "render_figures",
    "run_episode",
    "run_sweep",
    "sample_mvn",
    "select_best_gamma",
    "select_pair",
    "theoretical_gamma",
    "theoretical_lambda",
    "write_results",
]
