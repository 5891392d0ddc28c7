"""
Dynamic-programming benchmark for the closed-form policy
========================================================

Solves the discretized single-item control problem by backward induction,
then Monte-Carlo-evaluates the closed-form intensity u = q^(-1/2)(1 - m)
on the same problem.  The DP value is a floor for any policy; the printed
gap measures how far the closed form sits above that floor on the
finite-horizon problem.  See notes on why this gap is large and does not
shrink with the step size.
"""

from memsched import (
    ControlProblem,
    DPGrid,
    ItemParams,
    evaluate_policy_cost,
    optimal_policy,
    solve_dp,
)

problem = ControlProblem(t0=0.0, t_f=20.0,
                         params=ItemParams(alpha=0.5, beta=1.0, n0=1.0),
                         q=3e-4)

print(f"{'dt':>8} {'dp value':>10}")
for dt in (0.04, 0.02, 0.01):
    result = solve_dp(problem, DPGrid(dt=dt))
    print(f"{dt:8.3f} {result.value:10.5f}")

closed_form = optimal_policy(problem)
cost, stderr = evaluate_policy_cost(closed_form, problem, runs=2000, seed=0)
print(f"\nclosed-form MC cost: {cost:.4f} +/- {stderr:.4f}")
print(f"gap over DP value at dt=0.01: {cost - result.value:.4f}")
