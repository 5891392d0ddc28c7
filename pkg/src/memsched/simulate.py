"""Monte-Carlo ensemble experiments: schedule comparisons, parameter sweeps,
budget matching, and numerical verification of the recall-probability SDE."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .memory import (
    EXPONENTIAL,
    ItemParams,
    MemoryState,
    ModelKind,
    ReviewEvent,
    apply_review,
    recall_prob,
)
from .schedulers import (
    LastMinuteSchedule,
    OptimalSchedule,
    ScheduleSpec,
    ThresholdSchedule,
    UniformSchedule,
    intensity,
    model_recall_source,
    simulate_schedule,
)

# "30% band" = central 30% of the run distribution
BAND_LO, BAND_HI = 35.0, 65.0


@dataclass(frozen=True)
class ExperimentConfig:
    t0: float
    t_f: float
    params: ItemParams
    schedule: ScheduleSpec
    runs: int = 100
    seed: int = 0
    model: ModelKind = field(default_factory=ModelKind.exponential)
    tau_probe: tuple[float, ...] = (5.0, 15.0)
    grid_points: int = 200

    def __post_init__(self):
        if self.t_f <= self.t0:
            raise ValueError("t_f must exceed t0")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


@dataclass
class EnsembleMetrics:
    """Per-time median and 30%-band quantiles across simulation runs.

    ``curves[name]`` maps a metric name ("n", "u", "N", "m+<tau>") to an
    array of shape (3, grid) holding (q_lo, median, q_hi) rows. ``raw``
    holds the full (runs, grid) matrices for downstream statistics.
    """

    grid: np.ndarray
    curves: dict[str, np.ndarray]
    raw: dict[str, np.ndarray]
    total_reviews: np.ndarray  # per-run event counts

    def median(self, name: str) -> np.ndarray:
        return self.curves[name][1]


def _run_paths(config: ExperimentConfig, grid: np.ndarray,
               child_seed: np.random.SeedSequence) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(child_seed)
    events, _ = simulate_schedule(
        config.schedule, config.params, config.t0, config.t_f,
        model_recall_source(rng), rng, config.model)

    n_path = np.empty_like(grid)
    u_path = np.empty_like(grid)
    count_path = np.empty_like(grid)
    m_paths = {tau: np.empty_like(grid) for tau in config.tau_probe}

    state = MemoryState.initial(config.params.n0, config.t0, config.model)
    idx = 0
    for gi, t in enumerate(grid):
        while idx < len(events) and events[idx].t <= t:
            ev = events[idx]
            state = apply_review(state, ev.t, ev.recall, config.params)
            idx += 1
        n_path[gi] = state.n
        u_path[gi] = intensity(config.schedule, state, t)
        count_path[gi] = idx
        for tau in config.tau_probe:
            m_paths[tau][gi] = recall_prob(state, t + tau)

    out = {"n": n_path, "u": u_path, "N": count_path}
    for tau in config.tau_probe:
        out[f"m+{tau:g}"] = m_paths[tau]
    return out


def run_ensemble(config: ExperimentConfig) -> EnsembleMetrics:
    """Independent runs of one schedule, summarized on a uniform time grid."""
    grid = np.linspace(config.t0, config.t_f, config.grid_points)
    children = np.random.SeedSequence(config.seed).spawn(config.runs)

    raw: dict[str, list[np.ndarray]] = {}
    for child in children:
        paths = _run_paths(config, grid, child)
        for name, path in paths.items():
            raw.setdefault(name, []).append(path)

    stacked = {name: np.vstack(rows) for name, rows in raw.items()}
    curves = {}
    for name, mat in stacked.items():
        lo, med, hi = np.percentile(mat, [BAND_LO, 50.0, BAND_HI], axis=0)
        curves[name] = np.vstack([lo, med, hi])
    return EnsembleMetrics(grid=grid, curves=curves, raw=stacked,
                           total_reviews=stacked["N"][:, -1].copy())


def expected_review_count(spec: ScheduleSpec, config: ExperimentConfig) -> float:
    """Mean total reviews over (t0, t_f]; closed form where the intensity does
    not depend on the review history, ensemble estimate otherwise."""
    window = config.t_f - config.t0
    if isinstance(spec, UniformSchedule):
        return spec.mu * window
    if isinstance(spec, LastMinuteSchedule):
        return spec.mu * max(0.0, config.t_f - max(config.t0, spec.t_lm))
    cfg = dataclasses.replace(config, schedule=spec)
    return float(run_ensemble(cfg).total_reviews.mean())


def _with_rate(template: ScheduleSpec, rate: float) -> ScheduleSpec:
    if isinstance(template, UniformSchedule):
        return UniformSchedule(mu=rate)
    if isinstance(template, LastMinuteSchedule):
        return dataclasses.replace(template, mu=rate)
    if isinstance(template, ThresholdSchedule):
        return dataclasses.replace(template, c=rate)
    raise TypeError("budget matching needs a schedule with one free rate "
                    f"parameter, got {template!r}")


def match_budget(target_count: float, template: ScheduleSpec,
                 config: ExperimentConfig, tol: float = 0.05,
                 max_iter: int = 60) -> ScheduleSpec:
    """Calibrate the free rate parameter (mu or c) so the mean total review
    count matches target_count within tol, by monotone bisection."""
    if target_count < 0:
        raise ValueError("target_count must be >= 0")
    if target_count == 0:
        return _with_rate(template, 0.0)

    def count_at(rate: float) -> float:
        return expected_review_count(_with_rate(template, rate), config)

    lo, hi = 0.0, max(1.0, target_count / (config.t_f - config.t0))
    c_hi = count_at(hi)
    doublings = 0
    while c_hi < target_count:
        hi *= 2.0
        c_hi = count_at(hi)
        doublings += 1
        if doublings > 40:
            raise RuntimeError(
                f"target {target_count} unreachable within bracket [0, {hi}]")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        c_mid = count_at(mid)
        if abs(c_mid - target_count) / target_count <= tol:
            return _with_rate(template, mid)
        if c_mid < target_count:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        f"bisection failed to reach target {target_count} within "
        f"bracket [{lo}, {hi}]")


def sweep_learning_effort(q_values: Sequence[float], config: ExperimentConfig,
                          ) -> list[dict[str, float]]:
    """One ensemble per q: final forgetting rate and review-count summaries.

    Medians are reported alongside means: rare failure-spiral runs (long gap,
    then a run of failed recalls doubling n) dominate the means at large q.
    """
    rows = []
    for q in q_values:
        cfg = dataclasses.replace(config, schedule=OptimalSchedule(q))
        metrics = run_ensemble(cfg)
        n_final = metrics.raw["n"][:, -1]
        rows.append({
            "q": q,
            "mean_n_final": float(n_final.mean()),
            "median_n_final": float(np.median(n_final)),
            "mean_reviews": float(metrics.total_reviews.mean()),
            "median_reviews": float(np.median(metrics.total_reviews)),
        })
    return rows


def sweep_time_to_half(alpha_values: Sequence[float],
                       beta_values: Sequence[float],
                       n0: float = 20.0, q: float = 0.02,
                       t_f: float = 100.0, runs: int = 50, seed: int = 0,
                       model: Optional[ModelKind] = None,
                       ) -> list[dict[str, float]]:
    """First-passage time to n(t) <= n0/2 under the optimal schedule, per
    (alpha, beta) cell.

    ``mean_time_to_half`` averages the runs that reach half; runs that never
    do are counted in ``censored``. ``rmst`` is the restricted mean (censored
    runs scored at the horizon t_f), robust to heavy censoring.
    """
    model = model or ModelKind.exponential()
    rows = []
    root = np.random.SeedSequence(seed)
    for alpha in alpha_values:
        for beta in beta_values:
            params = ItemParams(alpha=alpha, beta=beta, n0=n0)
            children = root.spawn(runs)
            times, censored = [], 0
            for child in children:
                rng = np.random.default_rng(child)
                events, _ = simulate_schedule(
                    OptimalSchedule(q), params, 0.0, t_f,
                    model_recall_source(rng), rng, model)
                state = MemoryState.initial(n0, 0.0, model)
                hit = None
                for ev in events:
                    state = apply_review(state, ev.t, ev.recall, params)
                    if state.n <= n0 / 2.0:
                        hit = ev.t
                        break
                if hit is None:
                    censored += 1
                else:
                    times.append(hit)
            capped = times + [t_f] * censored
            rows.append({
                "alpha": alpha,
                "beta": beta,
                "mean_time_to_half": float(np.mean(times)) if times else math.nan,
                "rmst": float(np.mean(capped)),
                "censored": censored,
            })
    return rows


def verify_recall_sde(state: MemoryState, horizon: float, step: float,
                      reviews: Optional[Sequence[ReviewEvent]] = None,
                      params: Optional[ItemParams] = None) -> float:
    """Euler-integrate the recall-probability drift between jumps and return
    the max absolute deviation from the closed-form recall probability.

    With ``reviews`` given, m resets to exactly 1 at each event and the
    forgetting rate jumps per the review outcome.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    reviews = sorted(reviews or [], key=lambda e: e.t)
    if reviews and params is None:
        raise ValueError("params required when reviews are given")

    t = state.t_last
    t_end = t + horizon
    m = 1.0
    max_dev = 0.0
    rev_idx = 0
    pl = state.kind.family != EXPONENTIAL
    omega = state.kind.omega
    while t < t_end - 1e-15:
        dt = min(step, t_end - t)
        if rev_idx < len(reviews) and reviews[rev_idx].t <= t + dt:
            ev = reviews[rev_idx]
            dt = ev.t - t
            if dt > 0:
                m = _euler_step(m, state, t, dt, pl, omega)
                t = ev.t
                max_dev = max(max_dev, abs(m - recall_prob(state, t)))
            state = apply_review(state, ev.t, ev.recall, params)
            m = 1.0  # jump term (1 - m) dN
            rev_idx += 1
            continue
        m = _euler_step(m, state, t, dt, pl, omega)
        t += dt
        max_dev = max(max_dev, abs(m - recall_prob(state, t)))
    return max_dev


def _euler_step(m: float, state: MemoryState, t: float, dt: float,
                pl: bool, omega: float) -> float:
    n = state.n
    if pl:
        elapsed = t - state.t_last
        drift = -n * m * omega / (1.0 + omega * elapsed)
    else:
        drift = -n * m
    return m + drift * dt
