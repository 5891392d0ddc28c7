"""Optimal spaced-repetition scheduling via stochastic control of jump SDEs."""

from .memory import (
    ItemParams,
    MemoryState,
    ModelKind,
    ReviewEvent,
    apply_review,
    recall_prob,
    sample_recall,
)
from .schedulers import (
    LastMinuteSchedule,
    OptimalSchedule,
    ScheduleSpec,
    ThresholdSchedule,
    UniformSchedule,
    intensity,
    optimal_session,
    sample_next_review,
    simulate_schedule,
)
from .simulate import (
    EnsembleMetrics,
    ExperimentConfig,
    match_budget,
    run_ensemble,
    sweep_learning_effort,
    sweep_time_to_half,
    verify_recall_sde,
)
from .control import (
    ControlProblem,
    DPGrid,
    evaluate_policy_cost,
    optimal_policy,
    solve_dp,
)
from .estimate import (
    BinnedFit,
    FitConfig,
    FittedModel,
    ReviewSequence,
    fit_binned_alpha_beta,
    fit_halflife_regression,
    fit_mu_mle,
    fit_q_mle,
    fit_threshold_mle,
    predictive_metrics,
)
from .evaluate import (
    EvalReport,
    SequenceRecord,
    effort,
    empirical_forgetting_rate,
    integrated_intensity,
    ks_two_sample,
    likelihood_histogram,
    log_likelihood,
    rank_and_compare,
    score_records,
)
from .ingest import CanonicalLog, RawSessionRow, collapse_and_filter, parse_csv
from .service import ReviewService, create_app

__all__ = [
    "ItemParams", "MemoryState", "ModelKind", "ReviewEvent",
    "apply_review", "recall_prob", "sample_recall",
    "OptimalSchedule", "UniformSchedule", "LastMinuteSchedule",
    "ThresholdSchedule", "ScheduleSpec", "intensity",
    "sample_next_review", "simulate_schedule", "optimal_session",
    "ExperimentConfig", "EnsembleMetrics", "run_ensemble", "match_budget",
    "sweep_learning_effort", "sweep_time_to_half", "verify_recall_sde",
    "ControlProblem", "DPGrid", "solve_dp", "evaluate_policy_cost",
    "optimal_policy",
    "ReviewSequence", "FitConfig", "FittedModel", "BinnedFit",
    "fit_halflife_regression", "fit_binned_alpha_beta", "fit_q_mle",
    "fit_mu_mle", "fit_threshold_mle", "predictive_metrics",
    "SequenceRecord", "EvalReport", "integrated_intensity", "log_likelihood",
    "effort", "empirical_forgetting_rate", "ks_two_sample", "score_records",
    "rank_and_compare", "likelihood_histogram",
    "RawSessionRow", "CanonicalLog", "parse_csv", "collapse_and_filter",
    "ReviewService", "create_app",
]
