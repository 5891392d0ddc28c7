"""
Single-item schedule comparison at a matched review budget
==========================================================

Simulates one flashcard over a 20-day window under the closed-form optimal
intensity and three baselines, with every baseline's rate tuned so all four
spend the same expected number of reviews.  Prints the median forgetting
rate at the horizon and the median recall probabilities 5 and 15 days after
practice stops.  Lower n and higher m is better.
"""

import numpy as np

from memsched import (
    ExperimentConfig,
    ItemParams,
    LastMinuteSchedule,
    OptimalSchedule,
    ThresholdSchedule,
    UniformSchedule,
    match_budget,
    run_ensemble,
)
from memsched.simulate import expected_review_count

PARAMS = ItemParams(alpha=0.5, beta=1.0, n0=1.0)
Q = 3e-4
T_F = 20.0
RUNS = 100


def config_for(spec):
    return ExperimentConfig(t0=0.0, t_f=T_F, params=PARAMS, schedule=spec,
                            runs=RUNS, seed=2024)


optimal = OptimalSchedule(q=Q)
budget = expected_review_count(optimal, config_for(optimal))
print(f"target budget: {budget:.1f} reviews over {T_F:g} days")

# budget-match each baseline by scaling its rate parameter
schedules = {"optimal": optimal}
for name, template in [("uniform", UniformSchedule(1.0)),
                       ("last-minute", LastMinuteSchedule(t_lm=15.0, mu=1.0)),
                       ("threshold", ThresholdSchedule(m_th=0.7, c=1.0,
                                                       zeta=1.0))]:
    schedules[name] = match_budget(budget, template, config_for(template))

print(f"{'schedule':<12} {'reviews':>8} {'n(T)':>8} {'m(T+5)':>8} "
      f"{'m(T+15)':>8}")
for name, spec in schedules.items():
    metrics = run_ensemble(config_for(spec))
    n_final = np.median(metrics.raw["n"][:, -1])
    m5 = np.median(metrics.raw["m+5"][:, -1])
    m15 = np.median(metrics.raw["m+15"][:, -1])
    reviews = float(np.mean(metrics.total_reviews))
    print(f"{name:<12} {reviews:8.1f} {n_final:8.3f} {m5:8.3f} {m15:8.3f}")
