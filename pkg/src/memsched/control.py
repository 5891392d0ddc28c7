"""Discretized dynamic-programming oracle for the review-scheduling control
problem, used to verify the closed-form optimal intensity numerically.

The controlled system: recall probability m decays as dm = -n m dt between
reviews; a review arrives with probability u*dt per step, succeeds with
probability m, jumps m to 1 and scales n by (1-alpha) on success or (1+beta)
on failure. Running cost 0.5*(1-m)^2 + 0.5*q*u^2, zero terminal penalty.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .memory import EXPONENTIAL, ItemParams, MemoryState, ModelKind
from .schedulers import OptimalSchedule


@dataclass(frozen=True)
class ControlProblem:
    t0: float
    t_f: float
    params: ItemParams
    q: float

    def __post_init__(self):
        if self.t_f <= self.t0:
            raise ValueError("t_f must exceed t0")
        if self.q <= 0:
            raise ValueError("q must be > 0")


@dataclass(frozen=True)
class DPGrid:
    dt: float = 0.01
    m_points: int = 241
    k_max: int = 40  # max multiplicative updates spanned by the n lattice
    n_actions: int = 64
    # per-step review probability: "exact" = 1-exp(-u*dt) (valid for any u),
    # "linear" = u*dt (requires u_max*dt < 1)
    jump_prob: str = "exact"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.m_points < 3 or self.k_max < 1 or self.n_actions < 2:
            raise ValueError("degenerate grid resolution")
        if self.jump_prob not in ("exact", "linear"):
            raise ValueError("jump_prob must be 'exact' or 'linear'")


@dataclass
class DPPolicy:
    """Intensity chosen by the DP at the initial time slice, indexed by
    (n-lattice state, m-grid point)."""

    lattice_n: np.ndarray  # (S,) forgetting-rate values
    m_grid: np.ndarray  # (M,)
    u: np.ndarray  # (S, M)


@dataclass
class DPResult:
    value: float  # optimal cost-to-go from (n0, m=1) at t0
    policy: DPPolicy
    grid: DPGrid
    boundary_absorbed: bool


def _build_lattice(params: ItemParams, k_max: int):
    """Reachable n values n0*(1-a)^i*(1+b)^j with i+j <= k_max, plus the
    index maps for success/failure transitions (absorbing at the boundary)."""
    states = [(i, j) for i in range(k_max + 1)
              for j in range(k_max + 1 - i)]
    index = {s: k for k, s in enumerate(states)}
    la, lb = math.log1p(-params.alpha) if params.alpha < 1 else -math.inf, \
        math.log1p(params.beta)
    n_vals = np.array([params.n0 * math.exp(i * la + j * lb)
                       for i, j in states])
    succ = np.empty(len(states), dtype=np.int64)
    fail = np.empty(len(states), dtype=np.int64)
    absorbed = False
    for k, (i, j) in enumerate(states):
        if i + j < k_max:
            succ[k] = index[(i + 1, j)]
            fail[k] = index[(i, j + 1)]
        else:
            succ[k] = k
            fail[k] = k
            absorbed = True
    return n_vals, succ, fail, index, absorbed


def _lower_envelope(p: np.ndarray, c: np.ndarray):
    """Lower envelope of the lines g -> c[a] + p[a]*g (p strictly increasing).

    Returns (hull, breaks): for a gain value g, the minimizing line index is
    hull[searchsorted(breaks, g)]. Active lines are the lower convex hull of
    the points (p[a], c[a]).
    """
    hull_pts: list[int] = []
    for a in range(len(p)):
        while len(hull_pts) >= 2:
            o, b = hull_pts[-2], hull_pts[-1]
            if ((p[b] - p[o]) * (c[a] - c[o])
                    - (c[b] - c[o]) * (p[a] - p[o])) <= 0.0:
                hull_pts.pop()
            else:
                break
        hull_pts.append(a)
    # crossing between consecutive hull lines; decreasing along the hull
    cross = [(c[i] - c[j]) / (p[j] - p[i])
             for i, j in zip(hull_pts, hull_pts[1:])]
    hull = np.array(hull_pts[::-1], dtype=np.int64)
    breaks = np.array(cross[::-1])
    return hull, breaks


def solve_dp(problem: ControlProblem, grid: Optional[DPGrid] = None,
             ) -> DPResult:
    """Backward induction over the discretized control problem.

    Returns the optimal value at the initial state (n = n0, m = 1) and the
    policy slice at t0. Raises when u_max*dt >= 1 (invalid as a per-step
    review probability).
    """
    grid = grid or DPGrid()
    params = problem.params
    u_max = 2.0 * problem.q ** -0.5
    linear = grid.jump_prob == "linear"
    if linear and u_max * grid.dt >= 1.0:
        raise ValueError(
            f"invalid discretization: u_max*dt = {u_max * grid.dt:.3g} >= 1")

    n_vals, succ, fail, index, absorbed = _build_lattice(params, grid.k_max)
    if absorbed:
        warnings.warn("n lattice truncated at k_max; boundary states absorb")
    S = len(n_vals)
    m_grid = np.linspace(0.0, 1.0, grid.m_points)
    M = grid.m_points
    h = m_grid[1] - m_grid[0]

    # action set: 0 plus log-spaced intensities up to 2*q**-0.5
    actions = np.concatenate([
        [0.0], np.geomspace(u_max / 1e3, u_max, grid.n_actions - 1)])

    # per-lattice decay of m over one step, as interpolation weights
    decay = np.exp(-n_vals * grid.dt)  # (S,)
    m_next = m_grid[None, :] * decay[:, None]  # (S, M)
    pos = m_next / h
    i0 = np.minimum(pos.astype(np.int64), M - 2)
    w = pos - i0
    i1 = i0 + 1

    steps = int(round((problem.t_f - problem.t0) / grid.dt))
    run_m = 0.5 * (1.0 - m_grid[None, :]) ** 2 * grid.dt  # (1, M)
    q = problem.q
    dt = grid.dt

    # per-action step cost c_a + p_a * gain is linear in the jump gain, so
    # the exact minimum over the action set is the lower envelope of lines
    p_act = actions * dt if linear else -np.expm1(-actions * dt)
    c_act = 0.5 * q * actions ** 2 * dt
    hull, breaks = _lower_envelope(p_act, c_act)

    J = np.zeros((S, M))  # terminal penalty is zero
    policy = np.zeros((S, M))
    for step in range(steps - 1, -1, -1):
        j_stay = (np.take_along_axis(J, i0, axis=1) * (1.0 - w)
                  + np.take_along_axis(J, i1, axis=1) * w)
        j_succ = J[succ, -1]  # m jumps to exactly 1
        j_fail = J[fail, -1]
        gain = (m_grid[None, :] * j_succ[:, None]
                + (1.0 - m_grid[None, :]) * j_fail[:, None] - j_stay)

        sel = hull[np.searchsorted(breaks, gain)]
        J = run_m + j_stay + c_act[sel] + p_act[sel] * gain
        if step == 0:
            policy = actions[sel]

    value = float(J[index[(0, 0)], -1])  # initial state: n0, m = 1
    return DPResult(value=value,
                    policy=DPPolicy(lattice_n=n_vals, m_grid=m_grid, u=policy),
                    grid=grid, boundary_absorbed=absorbed)


def _segment_cost(n: float, q: float, dt: float,
                  u_of_m: Callable[[float], float], nodes, weights) -> float:
    """Gauss-Legendre integral of the running cost over one inter-review
    segment, with m(tau) = exp(-n*tau) from the segment start."""
    tau = 0.5 * dt * (nodes + 1.0)
    m = np.exp(-n * tau)
    u = np.array([u_of_m(mi) for mi in m])
    dens = 0.5 * (1.0 - m) ** 2 + 0.5 * q * u * u
    return 0.5 * dt * float(np.dot(weights, dens))


def evaluate_policy_cost(policy: Union[Callable[[float], float], DPPolicy],
                         problem: ControlProblem, runs: int = 1000,
                         seed: int = 0, dt_policy: float = 0.01,
                         ) -> tuple[float, float]:
    """Monte-Carlo expected total cost of a policy, with its standard error.

    A callable policy maps recall probability m to an intensity and is
    simulated in continuous time by thinning with exact per-segment cost
    integrals. A DPPolicy is simulated on its own discrete grid.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if isinstance(policy, DPPolicy):
        costs = _simulate_dp_policy(policy, problem, runs, seed, dt_policy)
    else:
        costs = _simulate_callable(policy, problem, runs, seed)
    mean = float(np.mean(costs))
    stderr = float(np.std(costs, ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return mean, stderr


def _simulate_callable(u_of_m, problem: ControlProblem, runs: int,
                       seed: int) -> np.ndarray:
    params, q = problem.params, problem.q
    probe = np.linspace(0.0, 1.0, 513)
    majorant = float(max(u_of_m(m) for m in probe)) * 1.0000001
    nodes, weights = np.polynomial.legendre.leggauss(24)
    children = np.random.SeedSequence(seed).spawn(runs)
    costs = np.empty(runs)
    for ri, child in enumerate(children):
        rng = np.random.default_rng(child)
        t = problem.t0
        log_n = math.log(params.n0)
        t_seg = t  # last review (or start) time
        cost = 0.0
        if majorant <= 0:
            n = math.exp(log_n)
            costs[ri] = _segment_cost(n, q, problem.t_f - t, u_of_m,
                                      nodes, weights)
            continue
        while True:
            t_prop = t + rng.exponential(1.0 / majorant)
            n = math.exp(log_n)
            if t_prop > problem.t_f:
                cost += _segment_cost_window(n, q, t_seg, t, problem.t_f,
                                             u_of_m, nodes, weights)
                break
            cost += _segment_cost_window(n, q, t_seg, t, t_prop,
                                         u_of_m, nodes, weights)
            m = math.exp(-n * (t_prop - t_seg))
            if rng.random() < u_of_m(m) / majorant:
                r = rng.random() < m
                log_n += math.log1p(-params.alpha) if r \
                    else math.log1p(params.beta)
                log_n = min(max(log_n, math.log(1e-12)), math.log(1e12))
                t_seg = t_prop
            t = t_prop
        costs[ri] = cost
    return costs


def _segment_cost_window(n, q, t_seg, t_a, t_b, u_of_m, nodes, weights):
    """Running-cost integral over [t_a, t_b] within a segment whose decay
    clock started at t_seg."""
    dt = t_b - t_a
    if dt <= 0:
        return 0.0
    tau = t_a - t_seg + 0.5 * dt * (nodes + 1.0)
    m = np.exp(-n * tau)
    u = np.array([u_of_m(mi) for mi in m])
    dens = 0.5 * (1.0 - m) ** 2 + 0.5 * q * u * u
    return 0.5 * dt * float(np.dot(weights, dens))


def _simulate_dp_policy(policy: DPPolicy, problem: ControlProblem, runs: int,
                        seed: int, dt: float) -> np.ndarray:
    params, q = problem.params, problem.q
    n_vals = policy.lattice_n
    m_grid = policy.m_grid
    steps = int(round((problem.t_f - problem.t0) / dt))
    children = np.random.SeedSequence(seed).spawn(runs)
    costs = np.empty(runs)
    for ri, child in enumerate(children):
        rng = np.random.default_rng(child)
        n = params.n0
        si = int(np.argmin(np.abs(n_vals - n)))
        m = 1.0
        cost = 0.0
        for _ in range(steps):
            mi = int(np.clip(round(m * (len(m_grid) - 1)), 0,
                             len(m_grid) - 1))
            u = float(policy.u[si, mi])
            cost += (0.5 * (1.0 - m) ** 2 + 0.5 * q * u * u) * dt
            if rng.random() < -math.expm1(-u * dt):
                if rng.random() < m:
                    n = n * (1.0 - params.alpha)
                else:
                    n = n * (1.0 + params.beta)
                si = int(np.argmin(np.abs(n_vals - n)))
                m = 1.0
            else:
                m *= math.exp(-n * dt)
        costs[ri] = cost
    return costs


def evaluate_policy_on_grid(u_of_m: Callable[[float], float],
                            problem: ControlProblem,
                            grid: Optional[DPGrid] = None) -> float:
    """Exact expected cost of a fixed intensity rule u(m) on the DP grid.

    Same backward induction as solve_dp but with the action pinned to
    u_of_m(m) at every state, so the result is deterministic and directly
    comparable to the DP optimal value at the same resolution.
    """
    grid = grid or DPGrid()
    params = problem.params
    n_vals, succ, fail, index, _ = _build_lattice(params, grid.k_max)
    S = len(n_vals)
    m_grid = np.linspace(0.0, 1.0, grid.m_points)
    M = grid.m_points
    h = m_grid[1] - m_grid[0]

    decay = np.exp(-n_vals * grid.dt)
    m_next = m_grid[None, :] * decay[:, None]
    pos = m_next / h
    i0 = np.minimum(pos.astype(np.int64), M - 2)
    w = pos - i0
    i1 = i0 + 1

    u = np.array([u_of_m(m) for m in m_grid])[None, :]  # (1, M)
    dt = grid.dt
    q = problem.q
    p = u * dt if grid.jump_prob == "linear" else -np.expm1(-u * dt)
    run = (0.5 * (1.0 - m_grid[None, :]) ** 2 + 0.5 * q * u * u) * dt

    steps = int(round((problem.t_f - problem.t0) / dt))
    J = np.zeros((S, M))
    for _ in range(steps):
        j_stay = (np.take_along_axis(J, i0, axis=1) * (1.0 - w)
                  + np.take_along_axis(J, i1, axis=1) * w)
        j_review = (m_grid[None, :] * J[succ, -1][:, None]
                    + (1.0 - m_grid[None, :]) * J[fail, -1][:, None])
        J = run + (1.0 - p) * j_stay + p * j_review
    return float(J[index[(0, 0)], -1])


def optimal_policy(problem: ControlProblem) -> Callable[[float], float]:
    """Closed-form optimal intensity as a function of recall probability."""
    scale = problem.q ** -0.5
    return lambda m: scale * (1.0 - m)


def zero_policy_cost(problem: ControlProblem) -> float:
    """Analytic cost of never reviewing: integral of 0.5*(1-exp(-n0*t))^2."""
    n0 = problem.params.n0
    T = problem.t_f - problem.t0
    # expand (1 - e^{-nt})^2 = 1 - 2e^{-nt} + e^{-2nt}
    return 0.5 * (T + 2.0 * (math.exp(-n0 * T) - 1.0) / n0
                  - (math.exp(-2.0 * n0 * T) - 1.0) / (2.0 * n0))
