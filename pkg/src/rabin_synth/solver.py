"""Discounted utilities and optimal policies on the product MDP.

Utilities follow the convention that the reward of the current state is
collected at once (the n = 0 term), so the fixed point is
U = W + gamma * max_a P_a U.  Sweeps are Jacobi-style (whole-vector
updates), which makes results independent of any state partitioning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, InfeasibleEstimateError
from .mdp import StationaryPolicy
from .product import ProductMdp, RewardScheme, reward_vector

__all__ = [
    "SolverConfig", "ParameterBoundEstimate", "value_iteration",
    "policy_evaluation", "greedy_policy", "select_parameters",
    "utility_bound",
]

log = logging.getLogger(__name__)

# Q-values closer than this (relative to the utility scale) count as tied,
# and ties go to the lowest action index.  Keeps greedy extraction stable
# between iterative and exact evaluation.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    gamma: float
    tol: float = 1e-8
    max_iter: int = 10 ** 6

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("discount factor must lie in (0, 1)")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


def utility_bound(w: np.ndarray, gamma: float) -> float:
    """Sup-norm bound w_max / (1 - gamma) on any discounted utility."""
    return float(np.max(np.abs(w))) / (1.0 - gamma) if len(w) else 0.0


def _q_values(product: ProductMdp, w: np.ndarray, gamma: float, u: np.ndarray):
    q = np.empty((product.n_actions, product.n_states), dtype=np.float64)
    for a in range(product.n_actions):
        q[a] = w + gamma * (product.action_matrix(a) @ u)
    q[~product.enabled_mask] = -np.inf
    return q


def greedy_policy(q: np.ndarray, scale: float) -> StationaryPolicy:
    """Lowest-index action within TIE_TOL * scale of the per-state maximum."""
    best = q.max(axis=0)
    tol = TIE_TOL * max(1.0, scale)
    choice = np.argmax(q >= best - tol, axis=0)
    return StationaryPolicy(tuple(int(a) for a in choice))


def value_iteration(product: ProductMdp, scheme: RewardScheme,
                    config: SolverConfig):
    """Optimal discounted utilities and a greedy policy.

    Returns (utilities, policy).  Raises ConvergenceError if the sup-norm
    change has not dropped below `config.tol` within `config.max_iter`
    sweeps.
    """
    w = reward_vector(product, scheme)
    gamma = config.gamma
    u = np.zeros(product.n_states, dtype=np.float64)
    delta = math.inf
    for sweep in range(config.max_iter):
        q = _q_values(product, w, gamma, u)
        u_next = q.max(axis=0)
        delta = float(np.max(np.abs(u_next - u))) if len(u) else 0.0
        u = u_next
        if delta <= config.tol:
            break
    else:
        raise ConvergenceError(
            f"value iteration did not converge in {config.max_iter} sweeps", delta
        )
    q = _q_values(product, w, gamma, u)
    residual = float(np.max(np.abs(q.max(axis=0) - u)))
    guard = config.tol * (1.0 + gamma) / (1.0 - gamma)
    if residual > guard:
        raise ConvergenceError("Bellman residual exceeds guard after convergence",
                               residual)
    log.debug("value iteration: %d sweeps, residual %.3e", sweep + 1, residual)
    return u, greedy_policy(q, utility_bound(w, gamma))


def policy_evaluation(product: ProductMdp, policy: StationaryPolicy,
                      scheme: RewardScheme, config: SolverConfig) -> np.ndarray:
    """Utilities of a fixed policy, by iterating U = W + gamma * P_pi U."""
    if policy.n_states != product.n_states:
        raise ValueError("policy size does not match the product")
    w = reward_vector(product, scheme)
    gamma = config.gamma
    rows = []
    for p in range(product.n_states):
        a = policy[p]
        if a not in product.enabled(p):
            raise ValueError(f"policy chooses disabled action at product state {p}")
        rows.append(product.successors(p, a))
    succ_idx = [np.fromiter((t for t, _ in row), dtype=np.int64) for row in rows]
    succ_p = [np.fromiter((pr for _, pr in row), dtype=np.float64) for row in rows]
    indptr = np.concatenate(([0], np.cumsum([len(r) for r in rows])))
    mat = sp.csr_matrix(
        (np.concatenate(succ_p), np.concatenate(succ_idx), indptr),
        shape=(product.n_states, product.n_states),
    )
    u = np.zeros(product.n_states, dtype=np.float64)
    for _ in range(config.max_iter):
        u_next = w + gamma * (mat @ u)
        delta = float(np.max(np.abs(u_next - u)))
        u = u_next
        if delta <= config.tol:
            break
    else:
        raise ConvergenceError(
            f"policy evaluation did not converge in {config.max_iter} sweeps", delta
        )
    residual = float(np.max(np.abs(w + gamma * (mat @ u) - u)))
    log.debug("policy evaluation residual %.3e", residual)
    return u


# --- reward-parameter selection ----------------------------------------------

@dataclass(frozen=True)
class ParameterBoundEstimate:
    """User/empirical estimates feeding the (gamma, w_b) selection recipe.

    With the positive reward normalized to 1:
      * `return_period`: smallest step count with nonzero return probability
        inside a recurrent class,
      * `return_prob`: lower bound on that return probability,
      * `recurrent_gain`: lower bound on the recurrent-class gain term,
      * `transient_visits_1/2`: upper bounds on expected transient visit
        counts in the two violation analyses,
      * `slack`: strictness margin, 0 < slack < recurrent_gain.
    """

    return_period: int
    return_prob: float
    recurrent_gain: float
    transient_visits_1: float
    transient_visits_2: float
    slack: float

    def validate(self):
        if self.return_period < 1:
            raise InfeasibleEstimateError("return period must be >= 1")
        if not (0.0 < self.return_prob <= 1.0):
            raise InfeasibleEstimateError("return probability must lie in (0, 1]")
        if self.transient_visits_1 < 1 or self.transient_visits_2 < 1:
            raise InfeasibleEstimateError("transient visit bounds must be >= 1")
        if not (0.0 < self.slack < self.recurrent_gain):
            raise InfeasibleEstimateError(
                "slack must satisfy 0 < slack < recurrent gain"
            )


def select_parameters(est: ParameterBoundEstimate) -> tuple[float, float]:
    """Pick (gamma, w_b) satisfying both sufficiency inequalities.

    `w_b` is the least-magnitude value of the form -2**k with
    1 + w_b * return_prob < -slack, and gamma the smallest grid point
    1 - 2**-j making

        max(-N1 * w_b * (1 - gamma**n), -N2 * w_b * (1 - gamma)) < slack.

    Both inequalities are re-checked on the chosen pair before returning.
    """
    est.validate()
    eps, p = est.slack, est.return_prob
    n1, n2, period = est.transient_visits_1, est.transient_visits_2, est.return_period

    wb = None
    for k in range(0, 200):
        cand = -float(2 ** k)
        if 1.0 + cand * p < -eps:
            wb = cand
            break
    if wb is None:
        raise InfeasibleEstimateError("no representable w_b satisfies the bound")

    gamma = None
    for j in range(1, 400):
        cand = 1.0 - 2.0 ** (-j)
        if max(-n1 * wb * (1.0 - cand ** period), -n2 * wb * (1.0 - cand)) < eps:
            gamma = cand
            break
    if gamma is None:
        raise InfeasibleEstimateError("no grid discount factor satisfies the bound")

    # re-substitution check of the full system
    first = n1 * wb * (1.0 - gamma ** period) + est.recurrent_gain
    second = (1.0 + wb * p) - n2 * wb * (1.0 - gamma)
    if not (first > 0.0 and second < 0.0):
        raise InfeasibleEstimateError("selected pair fails re-substitution check")
    return gamma, wb
