"""Review-log evaluation pipeline: per-sequence schedule likelihoods with
per-sequence fitted rate parameters, effort and empirical forgetting-rate
metrics, top-quantile comparison tables, and likelihood histograms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .estimate import (
    P_CLAMP_HI,
    P_CLAMP_LO,
    ReviewSequence,
    _deficit_integral,
    _forgetting_path,
    fit_mu_mle,
    fit_q_mle,
    fit_threshold_mle,
)
from .memory import EXPONENTIAL, ItemParams, MemoryState, ModelKind
from .schedulers import (
    LastMinuteSchedule,
    OptimalSchedule,
    ScheduleSpec,
    ThresholdSchedule,
    UniformSchedule,
    crossing_delta,
)

SCHEDULES = ("optimal", "uniform", "threshold")
DEFAULT_ZETA_GRID = tuple(float(z) for z in np.geomspace(0.05, 50.0, 25))


@dataclass(frozen=True)
class SequenceRecord:
    """A scored (user, item) sequence; pattern is the ordered recall string,
    '1' for success and '0' for failure."""

    seq: ReviewSequence

    @property
    def pattern(self) -> str:
        return "".join("1" if r else "0" for r in self.seq.r)

    @property
    def key(self) -> tuple[str, str]:
        return (self.seq.user, self.seq.item)


@dataclass
class GroupResult:
    group: str
    selected: dict[str, list[tuple[str, str]]]
    mean_effort: dict[str, float]
    median_rate: dict[str, float]
    ratios: dict[str, float]
    ks_p: dict[str, float]
    rate_quartiles: dict[str, tuple[float, float]]


@dataclass
class EvalReport:
    log_likelihood: dict[str, np.ndarray]
    fitted: list[dict[str, object]]
    groups: list[GroupResult]
    skipped: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# intensity integrals and likelihoods


def _state_segments(seq: ReviewSequence, params: ItemParams):
    """(start, end, n, segment t0) for each inter-review interval covering
    [t0, t_end]."""
    n_path = _forgetting_path(seq, params)
    edges = np.concatenate([[seq.t0], seq.t, [seq.t_end]])
    return [(edges[k], edges[k + 1], n_path[k], edges[k])
            for k in range(len(edges) - 1)]


def integrated_intensity(spec: ScheduleSpec, seq: ReviewSequence,
                         params: ItemParams,
                         window: Optional[tuple[float, float]] = None,
                         kind: Optional[ModelKind] = None) -> float:
    """Integral of the schedule's intensity over the window given the
    sequence's realized review history."""
    kind = kind or ModelKind.exponential()
    a, b = window if window is not None else (seq.t0, seq.t_end)
    if b <= a:
        return 0.0
    if isinstance(spec, UniformSchedule):
        return spec.mu * (b - a)
    if isinstance(spec, LastMinuteSchedule):
        return spec.mu * max(0.0, b - max(a, spec.t_lm))

    total = 0.0
    for start, end, n, anchor in _state_segments(seq, params):
        lo, hi = max(start, a), min(end, b)
        if hi <= lo:
            continue
        if isinstance(spec, OptimalSchedule):
            scale = spec.q ** -0.5
            if kind.family == EXPONENTIAL:
                total += scale * (
                    _deficit_integral(n, hi - anchor, kind)
                    - _deficit_integral(n, lo - anchor, kind))
            else:
                val, _ = integrate.quad(
                    lambda t: scale * (1.0 - (1.0 + kind.omega
                                              * (t - anchor)) ** (-n)),
                    lo, hi, limit=200)
                total += val
        elif isinstance(spec, ThresholdSchedule):
            state = MemoryState.initial(n, anchor, kind)
            s = anchor + crossing_delta(state, spec.m_th)
            if hi <= s:
                continue
            val, err = integrate.quad(
                lambda t: spec.c * math.exp((t - s) / spec.zeta),
                max(lo, s), hi, limit=200, epsrel=1e-9)
            total += val
        else:
            raise TypeError(f"unknown schedule {spec!r}")
    return total


def _intensity_at_events(spec: ScheduleSpec, seq: ReviewSequence,
                         params: ItemParams, kind: ModelKind) -> np.ndarray:
    """u(t_i) just before each review, given the history so far."""
    segs = _state_segments(seq, params)
    out = np.empty(len(seq))
    for k in range(len(seq)):
        start, end, n, anchor = segs[k]
        t = seq.t[k]
        if isinstance(spec, UniformSchedule):
            out[k] = spec.mu
        elif isinstance(spec, LastMinuteSchedule):
            out[k] = spec.mu if t >= spec.t_lm else 0.0
        elif isinstance(spec, OptimalSchedule):
            if kind.family == EXPONENTIAL:
                m = math.exp(-n * (t - anchor))
            else:
                m = (1.0 + kind.omega * (t - anchor)) ** (-n)
            out[k] = spec.q ** -0.5 * (1.0 - m)
        elif isinstance(spec, ThresholdSchedule):
            state = MemoryState.initial(n, anchor, kind)
            s = anchor + crossing_delta(state, spec.m_th)
            out[k] = 0.0 if t < s else spec.c * math.exp((t - s) / spec.zeta)
        else:
            raise TypeError(f"unknown schedule {spec!r}")
    return out


def log_likelihood(seq: ReviewSequence, spec: ScheduleSpec,
                   params: ItemParams,
                   kind: Optional[ModelKind] = None,
                   window: Optional[tuple[float, float]] = None) -> float:
    """Point-process log likelihood sum(log u(t_i)) - integral of u.

    Returns -inf when any event falls where the schedule's intensity is 0.
    """
    kind = kind or ModelKind.exponential()
    a, b = window if window is not None else (seq.t0, seq.t_end)
    us = _intensity_at_events(spec, seq, params, kind)
    mask = (seq.t > a) & (seq.t <= b)
    us = us[mask]
    if np.any(us <= 0.0):
        return -math.inf
    return float(np.sum(np.log(us))
                 - integrated_intensity(spec, seq, params, (a, b), kind))


# ---------------------------------------------------------------------------
# metrics


def effort(seq: ReviewSequence) -> float:
    """Inverse of the span between first and last review."""
    if len(seq) < 2:
        raise ValueError("effort needs at least 2 events")
    span = seq.t[-1] - seq.t[0]
    if span <= 0:
        raise ValueError("degenerate reviewing period")
    return 1.0 / span


def empirical_forgetting_rate(seq: ReviewSequence,
                              item_baseline: float) -> float:
    """Model-free decay estimate from the last recall fraction and gap,
    normalized by the item's initial-rate baseline."""
    if len(seq) < 2:
        raise ValueError("empirical forgetting rate needs at least 2 events")
    if item_baseline <= 0:
        raise ValueError("item baseline must be > 0")
    p = seq.p[-1]
    if p <= P_CLAMP_LO or p >= P_CLAMP_HI:
        warnings.warn("recall fraction clamped for the forgetting-rate probe")
        p = min(max(p, P_CLAMP_LO), P_CLAMP_HI)
    gap = seq.t[-1] - seq.t[-2]
    return (-math.log(p) / gap) / item_baseline


def initial_forgetting_baseline(records: Sequence[SequenceRecord],
                                ) -> tuple[dict[str, float], int]:
    """Per-item average of each user's first-interval decay estimate; users
    whose first recall fraction clamps to an endpoint are dropped and
    counted."""
    per_item: dict[str, list[float]] = {}
    dropped = 0
    for rec in records:
        seq = rec.seq
        if len(seq) == 0 or seq.t[0] <= seq.t0:
            dropped += 1
            continue
        p = seq.p[0]
        if p <= P_CLAMP_LO or p >= P_CLAMP_HI:
            dropped += 1
            continue
        per_item.setdefault(seq.item, []).append(
            -math.log(p) / (seq.t[0] - seq.t0))
    return ({item: float(np.mean(v)) for item, v in per_item.items()},
            dropped)


# ---------------------------------------------------------------------------
# two-sample KS


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample KS p-value: exact below n=10, otherwise the asymptotic
    Kolmogorov distribution with the finite-sample effective-n correction."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("KS test needs nonempty samples")
    if min(n, m) < 10:
        return float(stats.ks_2samp(a, b, method="exact").pvalue)
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / n
    cdf_b = np.searchsorted(b, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = math.sqrt(n * m / (n + m))
    return float(special.kolmogorov((ne + 0.12 + 0.11 / ne) * d))


# ---------------------------------------------------------------------------
# scoring and ranking


def score_records(records: Sequence[SequenceRecord],
                  params_for: Callable[[SequenceRecord], ItemParams],
                  kind: Optional[ModelKind] = None,
                  zeta_grid: Sequence[float] = DEFAULT_ZETA_GRID,
                  ) -> EvalReport:
    """Fit each schedule's free rate parameters per sequence by MLE and
    score the sequence's likelihood under each schedule."""
    kind = kind or ModelKind.exponential()
    lls = {name: np.empty(len(records)) for name in SCHEDULES}
    fitted = []
    for i, rec in enumerate(records):
        seq = rec.seq
        params = params_for(rec)
        if len(seq) == 0:
            for name in SCHEDULES:
                lls[name][i] = -math.inf
            fitted.append({})
            continue
        q = fit_q_mle(seq, params, kind)
        mu = fit_mu_mle(seq)
        c, zeta = fit_threshold_mle(seq, zeta_grid)
        specs = {
            "optimal": OptimalSchedule(q=q),
            "uniform": UniformSchedule(mu=mu),
            # m_th pinned high: the anchor policy puts s at the previous
            # review, so arming is immediate up to the crossing offset
            "threshold": ThresholdSchedule(m_th=0.99, c=c, zeta=zeta),
        }
        for name, spec in specs.items():
            if name == "threshold":
                lls[name][i] = _threshold_anchor_ll(seq, c, zeta)
            else:
                lls[name][i] = log_likelihood(seq, spec, params, kind)
        fitted.append({"q": q, "mu": mu, "c": c, "zeta": zeta})
    return EvalReport(log_likelihood=lls, fitted=fitted, groups=[])


def _threshold_anchor_ll(seq: ReviewSequence, c: float, zeta: float) -> float:
    """LL of the reminder schedule with segment anchors at the previous
    review, matching fit_threshold_mle's model."""
    edges = np.concatenate([[seq.t0], seq.t, [seq.t_end]])
    seg = np.diff(edges)
    exposure = float(np.sum(zeta * np.expm1(seg / zeta)))
    if c <= 0:
        return -math.inf
    return len(seq) * math.log(c) + float(np.sum(seg[:-1] / zeta)) \
        - c * exposure


def _top_quantile(keys_lls: list[tuple[tuple[str, str], float]],
                  quantile: float) -> list[tuple[str, str]]:
    k = max(1, int(math.ceil(len(keys_lls) * quantile)))
    ordered = sorted(keys_lls, key=lambda kv: (-kv[1], kv[0]))
    return [key for key, _ in ordered[:k]]


def rank_and_compare(records: Sequence[SequenceRecord], report: EvalReport,
                     quantile: float = 0.25,
                     grouping: str = "pattern",
                     min_group: int = 4) -> EvalReport:
    """Per group: top-quantile selection per schedule, mean effort, median
    empirical forgetting rate, ratio cells and KS p-values against the
    adaptive schedule."""
    if grouping not in ("pattern", "review_count"):
        raise ValueError("grouping must be 'pattern' or 'review_count'")
    baseline, _ = initial_forgetting_baseline(records)

    usable = []
    metrics: dict[tuple[str, str], tuple[float, float]] = {}
    for i, rec in enumerate(records):
        if len(rec.seq) < 2:
            continue
        nb = baseline.get(rec.seq.item)
        if nb is None or nb <= 0:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            metrics[rec.key] = (effort(rec.seq),
                                empirical_forgetting_rate(rec.seq, nb))
        usable.append(i)

    def group_of(rec: SequenceRecord) -> str:
        return rec.pattern if grouping == "pattern" else str(len(rec.seq))

    groups: dict[str, list[int]] = {}
    for i in usable:
        groups.setdefault(group_of(records[i]), []).append(i)

    out_groups, skipped = [], []
    for gname in sorted(groups):
        idx = groups[gname]
        selected: dict[str, list[tuple[str, str]]] = {}
        mean_e: dict[str, float] = {}
        med_n: dict[str, float] = {}
        quart: dict[str, tuple[float, float]] = {}
        ok = True
        for name in SCHEDULES:
            pool = [(records[i].key, report.log_likelihood[name][i])
                    for i in idx]
            top = _top_quantile(pool, quantile)
            if len(top) < min_group:
                ok = False
                break
            es = [metrics[k][0] for k in top]
            ns = [metrics[k][1] for k in top]
            selected[name] = top
            mean_e[name] = float(np.mean(es))
            med_n[name] = float(np.median(ns))
            quart[name] = (float(np.percentile(ns, 25)),
                           float(np.percentile(ns, 75)))
        if not ok:
            skipped.append(f"group {gname!r}: fewer than {min_group} "
                           "selected pairs")
            continue
        ratios = {
            "effort_M_over_U": mean_e["optimal"] / mean_e["uniform"],
            "effort_M_over_T": mean_e["optimal"] / mean_e["threshold"],
            "rate_M_over_U": med_n["optimal"] / med_n["uniform"],
            "rate_M_over_T": med_n["optimal"] / med_n["threshold"],
        }
        ks = {
            "rate_M_vs_U": ks_two_sample(
                [metrics[k][1] for k in selected["optimal"]],
                [metrics[k][1] for k in selected["uniform"]]),
            "rate_M_vs_T": ks_two_sample(
                [metrics[k][1] for k in selected["optimal"]],
                [metrics[k][1] for k in selected["threshold"]]),
        }
        out_groups.append(GroupResult(
            group=gname, selected=selected, mean_effort=mean_e,
            median_rate=med_n, ratios=ratios, ks_p=ks,
            rate_quartiles=quart))
    return EvalReport(log_likelihood=report.log_likelihood,
                      fitted=report.fitted, groups=out_groups,
                      skipped=skipped)


def likelihood_histogram(report: EvalReport, schedule: str,
                         bins: int = 30) -> dict[str, object]:
    """Fixed-width histogram over finite log likelihoods; the -inf bucket is
    reported separately."""
    lls = report.log_likelihood[schedule]
    finite = lls[np.isfinite(lls)]
    n_inf = int(np.size(lls) - np.size(finite))
    if finite.size == 0:
        return {"edges": np.array([]), "counts": np.array([], dtype=int),
                "neg_inf": n_inf}
    lo, hi = float(finite.min()), float(finite.max())
    if lo == hi:
        hi = lo + 1.0
    counts, edges = np.histogram(finite, bins=bins, range=(lo, hi))
    return {"edges": edges, "counts": counts, "neg_inf": n_inf}
