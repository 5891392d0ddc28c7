"""Reviewing-intensity functions and thinning-based review-time sampling.

Four schedule families:

* ``OptimalSchedule(q)``   -- intensity ``q**-0.5 * (1 - m(t))``, the
  closed-form solution of the quadratic-loss control problem.
* ``UniformSchedule(mu)``  -- constant rate.
* ``LastMinuteSchedule``   -- constant rate, but only on ``[t_lm, t_f]``.
* ``ThresholdSchedule``    -- silent until recall probability falls below
  ``m_th`` at time ``s``, then ``c * exp((t - s) / zeta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .memory import (
    EXPONENTIAL,
    ItemParams,
    MemoryState,
    ModelKind,
    ReviewEvent,
    apply_review,
    recall_prob,
    sample_recall,
)


@dataclass(frozen=True)
class OptimalSchedule:
    q: float  # review-cost weight, time^2

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("q must be > 0")


@dataclass(frozen=True)
class UniformSchedule:
    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")


@dataclass(frozen=True)
class LastMinuteSchedule:
    t_lm: float
    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")


@dataclass(frozen=True)
class ThresholdSchedule:
    m_th: float
    c: float
    zeta: float

    def __post_init__(self):
        if not 0.0 < self.m_th < 1.0:
            raise ValueError("m_th must be in (0, 1)")
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if self.zeta <= 0:
            raise ValueError("zeta must be > 0")


ScheduleSpec = Union[OptimalSchedule, UniformSchedule,
                     LastMinuteSchedule, ThresholdSchedule]


@dataclass(frozen=True)
class ThresholdRuntime:
    """Arming state of the threshold schedule: s is the instant the recall
    probability last crossed m_th; the schedule is silent before s."""

    s: float
    armed: bool


def crossing_delta(state: MemoryState, m_th: float) -> float:
    """Elapsed time after state.t_last at which recall probability hits m_th."""
    n = state.n
    if state.kind.family == EXPONENTIAL:
        return -math.log(m_th) / n
    return (m_th ** (-1.0 / n) - 1.0) / state.kind.omega


def threshold_runtime(spec: ThresholdSchedule, state: MemoryState,
                      t: float) -> ThresholdRuntime:
    s = state.t_last + crossing_delta(state, spec.m_th)
    return ThresholdRuntime(s=s, armed=t >= s)


def intensity(spec: ScheduleSpec, state: MemoryState, t: float,
              runtime: Optional[ThresholdRuntime] = None) -> float:
    """Reviewing intensity of the given schedule at time t."""
    if isinstance(spec, OptimalSchedule):
        return spec.q ** -0.5 * (1.0 - recall_prob(state, t))
    if isinstance(spec, UniformSchedule):
        return spec.mu
    if isinstance(spec, LastMinuteSchedule):
        return spec.mu if t >= spec.t_lm else 0.0
    if isinstance(spec, ThresholdSchedule):
        if runtime is None:
            runtime = threshold_runtime(spec, state, t)
        if t < runtime.s:
            return 0.0
        return spec.c * math.exp((t - runtime.s) / spec.zeta)
    raise TypeError(f"unknown schedule {spec!r}")


def _sample_optimal(spec: OptimalSchedule, state: MemoryState, t_now: float,
                    t_f: float, rng: np.random.Generator,
                    block: int = 256) -> Optional[float]:
    """Thinning under the constant majorant q**-0.5 (since 1 - m <= 1),
    with proposals drawn in blocks for speed at small q."""
    majorant = spec.q ** -0.5
    t = t_now
    pl = state.kind.family != EXPONENTIAL
    n = state.n
    while True:
        gaps = rng.exponential(1.0 / majorant, size=block)
        times = t + np.cumsum(gaps)
        accept_u = rng.random(block)
        elapsed = times - state.t_last
        if pl:
            m = (1.0 + state.kind.omega * elapsed) ** (-n)
        else:
            m = np.exp(-n * elapsed)
        hits = np.nonzero((accept_u < 1.0 - m) & (times <= t_f))[0]
        if hits.size:
            return float(times[hits[0]])
        if times[-1] > t_f:
            return None
        t = float(times[-1])


def _sample_homogeneous(mu: float, t_start: float, t_f: float,
                        rng: np.random.Generator) -> Optional[float]:
    if mu <= 0 or t_start >= t_f:
        return None
    t = t_start + rng.exponential(1.0 / mu)
    return t if t <= t_f else None


def _sample_threshold(spec: ThresholdSchedule, state: MemoryState,
                      t_now: float, t_f: float,
                      rng: np.random.Generator) -> Optional[float]:
    if spec.c == 0:
        return None
    s = state.t_last + crossing_delta(state, spec.m_th)
    t = max(t_now, s)
    # exp growth needs a piecewise envelope; zeta/4 keeps rejection below ~28%
    width = spec.zeta / 4.0
    while t < t_f:
        sub_end = min(t + width, t_f)
        majorant = spec.c * math.exp((sub_end - s) / spec.zeta)
        cand = t
        while True:
            cand = cand + rng.exponential(1.0 / majorant)
            if cand > sub_end:
                break
            u = spec.c * math.exp((cand - s) / spec.zeta)
            if rng.random() < u / majorant:
                return cand
        t = sub_end
    return None


def sample_next_review(spec: ScheduleSpec, state: MemoryState, t_now: float,
                       t_f: float, rng: np.random.Generator,
                       runtime: Optional[ThresholdRuntime] = None,
                       ) -> Optional[float]:
    """First event time of the schedule's point process in (t_now, t_f].

    Returns None when no event occurs before the horizon. Sampling uses
    thinning under a finite majorant; uniform-rate families need no rejection.
    """
    if t_now >= t_f:
        raise ValueError("horizon must satisfy t_now < t_f")

    if isinstance(spec, UniformSchedule):
        return _sample_homogeneous(spec.mu, t_now, t_f, rng)

    if isinstance(spec, LastMinuteSchedule):
        return _sample_homogeneous(spec.mu, max(t_now, spec.t_lm), t_f, rng)

    if isinstance(spec, OptimalSchedule):
        return _sample_optimal(spec, state, t_now, t_f, rng)

    if isinstance(spec, ThresholdSchedule):
        return _sample_threshold(spec, state, t_now, t_f, rng)

    raise TypeError(f"unknown schedule {spec!r}")


RecallSource = Callable[[float, MemoryState], int]


def model_recall_source(rng: np.random.Generator) -> RecallSource:
    """Recall outcomes drawn from the memory model itself."""
    return lambda t, state: sample_recall(state, t, rng)


def simulate_schedule(spec: ScheduleSpec, params: ItemParams, t0: float,
                      t_f: float, recall_source: RecallSource,
                      rng: np.random.Generator,
                      kind: Optional[ModelKind] = None,
                      item_id: str = "item",
                      ) -> tuple[list[ReviewEvent], MemoryState]:
    """Run one full review session of a single item over (t0, t_f].

    After each sampled review the recall outcome comes from recall_source,
    the forgetting rate jumps, and the intensity is recomputed before the
    next review time is sampled.
    """
    state = MemoryState.initial(params.n0, t0, kind)
    events: list[ReviewEvent] = []
    t = t0
    while t < t_f:
        s = sample_next_review(spec, state, t, t_f, rng)
        if s is None:
            break
        r = recall_source(s, state)
        events.append(ReviewEvent(item_id, s, r))
        state = apply_review(state, s, r, params)
        t = s
    return events, state


def optimal_session(params: ItemParams, q: float, t0: float, t_f: float,
                     recall_source: RecallSource, rng: np.random.Generator,
                     kind: Optional[ModelKind] = None,
                     item_id: str = "item",
                     ) -> tuple[list[ReviewEvent], MemoryState]:
    """Session under the closed-form optimal schedule (intensity
    ``q**-0.5 * (1 - m)``)."""
    return simulate_schedule(OptimalSchedule(q), params, t0, t_f,
                             recall_source, rng, kind, item_id)
