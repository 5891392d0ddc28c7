"""Memory-model mathematics: recall probability, jump updates, recall sampling.

The forgetting rate ``n`` decays memory either exponentially,
``m = exp(-n * elapsed)``, or as a power law, ``m = (1 + omega*elapsed)**(-n)``.
Each review multiplies ``n`` by ``(1 - alpha)`` on success or ``(1 + beta)``
on failure and restarts the decay clock.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

# n is kept in log-space internally; these bound the linear value.
N_FLOOR = 1e-12
N_CAP = 1e12

EXPONENTIAL = "exp"
POWER_LAW = "pl"


class ClampWarning(UserWarning):
    """Raised (as a warning) when a forgetting rate hits its bounds."""


@dataclass(frozen=True)
class ModelKind:
    family: str  # "exp" or "pl"
    omega: float = 1.0  # time-scale, power-law only

    def __post_init__(self):
        if self.family not in (EXPONENTIAL, POWER_LAW):
            raise ValueError(f"unknown model family {self.family!r}")
        if self.family == POWER_LAW and self.omega <= 0:
            raise ValueError("omega must be > 0 for the power-law model")

    @classmethod
    def exponential(cls) -> "ModelKind":
        return cls(EXPONENTIAL)

    @classmethod
    def power_law(cls, omega: float = 1.0) -> "ModelKind":
        return cls(POWER_LAW, omega)


@dataclass(frozen=True)
class ItemParams:
    """Per-item update parameters: alpha in [0,1], beta >= 0, n0 > 0."""

    alpha: float
    beta: float
    n0: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        if self.n0 <= 0.0:
            raise ValueError("n0 must be > 0")


@dataclass(frozen=True)
class MemoryState:
    """Forgetting rate and last-review time for one item.

    ``t_last`` is the time of the most recent review, or the first-exposure
    time for an item never reviewed; recall probability is 1 at ``t_last``.
    """

    log_n: float
    t_last: float
    kind: ModelKind = field(default_factory=ModelKind.exponential)

    @classmethod
    def initial(cls, n0: float, t0: float = 0.0,
                kind: ModelKind | None = None) -> "MemoryState":
        if n0 <= 0:
            raise ValueError("n0 must be > 0")
        return cls(math.log(n0), t0, kind or ModelKind.exponential())

    @property
    def n(self) -> float:
        return math.exp(self.log_n)


@dataclass(frozen=True)
class ReviewEvent:
    item_id: str
    t: float
    recall: int

    def __post_init__(self):
        if self.recall not in (0, 1):
            raise ValueError("recall must be 0 or 1")


def recall_prob(state: MemoryState, t: float) -> float:
    """Probability of successful recall at time t >= state.t_last."""
    elapsed = t - state.t_last
    if elapsed < 0:
        raise ValueError(f"t={t} precedes last review at {state.t_last}")
    n = state.n
    if state.kind.family == EXPONENTIAL:
        return math.exp(-n * elapsed)
    return (1.0 + state.kind.omega * elapsed) ** (-n)


def _clamped_log_n(log_n: float) -> float:
    lo, hi = math.log(N_FLOOR), math.log(N_CAP)
    if log_n < lo:
        warnings.warn("forgetting rate clamped at floor", ClampWarning)
        return lo
    if log_n > hi:
        warnings.warn("forgetting rate clamped at cap", ClampWarning)
        return hi
    return log_n


def apply_review(state: MemoryState, t: float, recall: int,
                 params: ItemParams) -> MemoryState:
    """Jump update: success scales n by (1-alpha), failure by (1+beta)."""
    if t < state.t_last:
        raise ValueError(f"t={t} precedes last review at {state.t_last}")
    if recall not in (0, 1):
        raise ValueError("recall must be 0 or 1")
    if recall == 1:
        if params.alpha >= 1.0:
            log_n = math.log(N_FLOOR)  # (1-alpha) = 0 collapses to the floor
            warnings.warn("forgetting rate clamped at floor", ClampWarning)
        else:
            log_n = _clamped_log_n(state.log_n + math.log1p(-params.alpha))
    else:
        log_n = _clamped_log_n(state.log_n + math.log1p(params.beta))
    return MemoryState(log_n, t, state.kind)


def sample_recall(state: MemoryState, t: float,
                  rng: np.random.Generator) -> int:
    """Bernoulli recall outcome with success probability recall_prob."""
    return int(rng.random() < recall_prob(state, t))
