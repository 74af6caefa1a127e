"""Online temporal-difference learning on the product MDP.

The learner never reads transition probabilities; it sees only observed
successor states.  Frequency tables are kept per equivalence class (all
product states sharing an MDP component), so one observation updates the
estimate for every automaton state at once.  A Rabin reset replaces the
automaton component of the current state with its initial state, either
when the automaton has fallen into a rejecting sink or periodically.

Two interchangeable kernels run the learning loop: a Cython extension and a
pure-Python fallback, selected at import (override with the
RABIN_SYNTH_BACKEND environment variable or the `backend` argument).  They
produce bit-identical learner states for the same seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _td_python
from .mdp import StationaryPolicy
from .product import ProductMdp, RewardScheme, reward_vector

try:
    from . import _tdcore
    HAVE_COMPILED_KERNEL = True
except ImportError:  # extension not built; pure Python still works
    _tdcore = None
    HAVE_COMPILED_KERNEL = False

__all__ = [
    "ExplorationStrategy", "LearnerState", "TrialLog", "td_step",
    "reset_condition", "reset_rabin_state", "explore_action", "run_trials",
    "default_backend", "HAVE_COMPILED_KERNEL",
]

_STRAT_CODES = {"uniform": 0, "epsilon": 1, "optimistic": 2}


def default_backend() -> str:
    env = os.environ.get("RABIN_SYNTH_BACKEND")
    if env in ("python", "cython"):
        return env
    return "cython" if HAVE_COMPILED_KERNEL else "python"


@dataclass(frozen=True)
class ExplorationStrategy:
    """How the learner picks actions: uniform, epsilon-greedy, or optimistic.

    Epsilon decays multiplicatively per step down to `epsilon_min`.  The
    optimistic strategy values (class, action) pairs seen fewer than
    `visit_threshold` times at `optimistic_value` (default: the utility
    bound wg / (1 - gamma)).
    """

    kind: str = "uniform"
    epsilon: float = 0.2
    epsilon_decay: float = 1.0
    epsilon_min: float = 0.0
    visit_threshold: int = 5
    optimistic_value: float | None = None

    def __post_init__(self):
        if self.kind not in _STRAT_CODES:
            raise ValueError(f"unknown exploration kind {self.kind!r}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in [0, 1]")
        if self.visit_threshold < 1:
            raise ValueError("visit threshold must be >= 1")

    @staticmethod
    def parse(text: str) -> "ExplorationStrategy":
        """Parse CLI syntax: ``uniform``, ``eps:0.2[:decay[:min]]``, ``opt:5[:value]``."""
        parts = text.split(":")
        if parts[0] == "uniform" and len(parts) == 1:
            return ExplorationStrategy("uniform")
        if parts[0] == "eps" and 2 <= len(parts) <= 4:
            return ExplorationStrategy(
                "epsilon",
                epsilon=float(parts[1]),
                epsilon_decay=float(parts[2]) if len(parts) > 2 else 1.0,
                epsilon_min=float(parts[3]) if len(parts) > 3 else 0.0,
            )
        if parts[0] == "opt" and 2 <= len(parts) <= 3:
            return ExplorationStrategy(
                "optimistic",
                visit_threshold=int(parts[1]),
                optimistic_value=float(parts[2]) if len(parts) > 2 else None,
            )
        raise ValueError(f"cannot parse exploration strategy {text!r}")


@dataclass
class TrialLog:
    trials: np.ndarray
    steps: np.ndarray
    g_visits: np.ndarray
    b_visits: np.ndarray
    resets: np.ndarray

    def to_csv(self) -> str:
        lines = ["trial,steps,g_visits,b_visits,resets"]
        for i in range(len(self.trials)):
            lines.append(f"{self.trials[i]},{self.steps[i]},"
                         f"{self.g_visits[i]},{self.b_visits[i]},{self.resets[i]}")
        return "\n".join(lines) + "\n"


class LearnerState:
    """Persistent learner variables plus the derived lookup tables.

    Mutable by design: `td_step`/`run_trials` update it in place.  Utilities
    exist only for visited states (`visited` mask); never-updated states keep
    the first enabled action as their policy default.
    """

    def __init__(self, product: ProductMdp, scheme: RewardScheme, gamma: float,
                 alpha: float = 0.9, strategy: ExplorationStrategy | None = None,
                 reset_interval: int = 200,
                 policy_init: StationaryPolicy | None = None,
                 utility_init=None,
                 prior_model=None, prior_weight: int = 0):
        if not (0.0 < alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if reset_interval < 1:
            raise ValueError("reset interval must be >= 1")
        self.product = product
        self.scheme = scheme
        self.gamma = float(gamma)
        self.alpha = float(alpha)
        self.reset_interval = int(reset_interval)
        self.strategy = strategy or ExplorationStrategy("uniform")

        n = product.n_states
        self.w = reward_vector(product, scheme)
        self.utilities = np.zeros(n, dtype=np.float64)
        self.visited = np.zeros(n, dtype=np.uint8)
        self.counts_sa = np.zeros((product.n_mdp, product.n_actions), dtype=np.int64)
        self.counts_succ = np.zeros(
            (product.n_mdp, product.n_actions, product.n_mdp), dtype=np.int64
        )
        if prior_model is not None and prior_weight > 0:
            _seed_pseudo_counts(self.counts_sa, self.counts_succ,
                                prior_model, prior_weight)
        # policy default: first enabled action per state
        first_enabled = np.array(
            [product.mdp.enabled[s][0] for s in range(product.n_mdp)], dtype=np.int32
        )
        self.policy = np.tile(first_enabled, product.n_dra)
        if policy_init is not None:
            if policy_init.n_states != n:
                raise ValueError("warm-start policy size does not match the product")
            for p, a in enumerate(policy_init.choices):
                if a not in product.enabled(p):
                    raise ValueError(f"warm-start policy disabled at state {p}")
            self.policy = np.asarray(policy_init.choices, dtype=np.int32).copy()
        if utility_init is not None:
            arr = np.asarray(utility_init, dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError("warm-start utilities size does not match the product")
            self.utilities = arr.copy()
            self.visited[:] = 1
        # (prev_state, prev_action, steps_since_reset, steps_total)
        self.istate = np.array([-1, -1, 0, 0], dtype=np.int64)
        self.fstate = np.array([self.strategy.epsilon], dtype=np.float64)
        self.current_state = product.initial

        # derived, constant tables
        self.rejecting_sink = _rejecting_sinks(product, scheme)
        self.en_off, self.en_act = _enabled_tables(product)
        self.dra_next_flat = np.ascontiguousarray(
            product.dra_next.reshape(-1), dtype=np.int32
        )
        self.optimistic_value = (
            self.strategy.optimistic_value
            if self.strategy.optimistic_value is not None
            else scheme.wg / (1.0 - self.gamma)
        )

    # -- views used by tests and callers --------------------------------

    @property
    def prev_state(self) -> int | None:
        return int(self.istate[0]) if self.istate[0] >= 0 else None

    @property
    def prev_action(self) -> int | None:
        return int(self.istate[1]) if self.istate[0] >= 0 else None

    @property
    def steps_since_reset(self) -> int:
        return int(self.istate[2])

    @property
    def steps_total(self) -> int:
        return int(self.istate[3])

    def utility_table(self) -> dict:
        """Utilities of visited states only (unvisited states are absent)."""
        return {int(p): float(self.utilities[p])
                for p in np.nonzero(self.visited)[0]}

    def transition_estimate(self, cls: int, action: int) -> dict:
        """P-hat row for one (equivalence class, action); empty if unvisited."""
        tot = int(self.counts_sa[cls, action])
        if tot == 0:
            return {}
        row = self.counts_succ[cls, action]
        return {int(t): float(row[t] / tot) for t in row.nonzero()[0]}

    def greedy_policy(self) -> StationaryPolicy:
        return StationaryPolicy(tuple(int(a) for a in self.policy))

    def equals(self, other: "LearnerState") -> bool:
        """Bitwise equality of every persistent variable."""
        return (
            np.array_equal(self.utilities, other.utilities)
            and np.array_equal(self.visited, other.visited)
            and np.array_equal(self.counts_sa, other.counts_sa)
            and np.array_equal(self.counts_succ, other.counts_succ)
            and np.array_equal(self.policy, other.policy)
            and np.array_equal(self.istate, other.istate)
            and np.array_equal(self.fstate, other.fstate)
        )


def _seed_pseudo_counts(counts_sa, counts_succ, prior_model, weight: int):
    """Initialize frequency tables from a model's rows (a priori estimates).

    Each enabled (class, action) gets `weight` pseudo-observations split by
    largest remainder, so the per-row marginal invariant holds exactly.
    """
    n_mdp, n_actions = counts_sa.shape
    if prior_model.n_states != n_mdp or prior_model.n_actions != n_actions:
        raise ValueError("prior model shape does not match the product's MDP")
    for s in range(n_mdp):
        for a in prior_model.enabled[s]:
            row = prior_model.transitions[(s, a)]
            probs = np.array([p for _, p in row])
            base = np.floor(weight * probs).astype(np.int64)
            short = weight - int(base.sum())
            if short > 0:
                frac = weight * probs - base
                for k in np.argsort(-frac, kind="stable")[:short]:
                    base[k] += 1
            counts_sa[s, a] = weight
            for (t, _), c in zip(row, base):
                counts_succ[s, a, t] = c


def _rejecting_sinks(product: ProductMdp, scheme: RewardScheme) -> np.ndarray:
    """Automaton states from which the active pair's inf set is unreachable."""
    dra = product.dra
    rev = [[] for _ in range(dra.n_states)]
    for q in range(dra.n_states):
        for succ in np.unique(dra.delta[q]):
            rev[int(succ)].append(q)
    good = set(dra.pairs[scheme.pair_index - 1].inf_states)
    stack = list(good)
    while stack:
        q = stack.pop()
        for r in rev[q]:
            if r not in good:
                good.add(r)
                stack.append(r)
    sinks = np.ones(dra.n_states, dtype=np.uint8)
    for q in good:
        sinks[q] = 0
    return sinks


def _enabled_tables(product: ProductMdp):
    lens = [len(product.mdp.enabled[s]) for s in range(product.n_mdp)]
    en_off = np.concatenate(([0], np.cumsum(lens))).astype(np.int64)
    en_act = np.fromiter(
        (a for s in range(product.n_mdp) for a in product.mdp.enabled[s]),
        dtype=np.int32,
    )
    return en_off, en_act


def _env_tables(product: ProductMdp):
    """Flattened (state, action) -> cumulative successor distribution tables."""
    n_mdp, n_act = product.n_mdp, product.n_actions
    offsets = np.zeros(n_mdp * n_act + 1, dtype=np.int64)
    succ_parts, cum_parts = [], []
    total = 0
    for s in range(n_mdp):
        for a in range(n_act):
            row = product.mdp.transitions.get((s, a), ())
            total += len(row)
            offsets[s * n_act + a + 1] = total
            if row:
                succ_parts.append(np.fromiter((t for t, _ in row), dtype=np.int32))
                cum_parts.append(np.cumsum([p for _, p in row]))
    succ = np.concatenate(succ_parts) if succ_parts else np.empty(0, dtype=np.int32)
    cum = np.concatenate(cum_parts) if cum_parts else np.empty(0, dtype=np.float64)
    return offsets, succ, cum.astype(np.float64)


def reset_rabin_state(product: ProductMdp, sp: int) -> int:
    """Keep the MDP component, send the automaton component back to start."""
    return product.dra.initial * product.n_mdp + sp % product.n_mdp


def reset_condition(ls: LearnerState, product: ProductMdp, sp: int,
                    force: bool = False) -> bool:
    """True when a Rabin reset is due at the observed state.

    Fires when the automaton component is a rejecting sink (a safety
    violation made positive reward unreachable) or after `reset_interval`
    steps without a reset; `force` models trial boundaries.
    """
    q = sp // product.n_mdp
    return bool(force or ls.steps_since_reset >= ls.reset_interval
                or ls.rejecting_sink[q])


def _core_args(ls: LearnerState):
    return (
        ls.utilities, ls.visited, ls.counts_sa, ls.counts_succ, ls.policy,
        ls.istate, ls.fstate, ls.w, ls.rejecting_sink, ls.dra_next_flat,
        ls.en_off, ls.en_act,
        ls.product.n_mdp, ls.product.n_actions,
        ls.alpha, ls.gamma, ls.reset_interval, ls.product.dra.initial,
        _STRAT_CODES[ls.strategy.kind], ls.strategy.epsilon_min,
        ls.strategy.epsilon_decay, ls.strategy.visit_threshold,
        ls.optimistic_value,
    )


def td_step(ls: LearnerState, product: ProductMdp, sp: int, rng,
            force_reset: bool = False) -> int:
    """One learning update for observed state `sp`; returns the next action.

    After the call, `ls.prev_state` holds the (possibly Rabin-reset) state
    the returned action applies to; continue the environment from there.
    """
    if product is not ls.product:
        raise ValueError("learner state was created for a different product")
    u0, u1 = rng.random(2)
    action, _, _ = _td_python.core_step(
        *_core_args(ls), sp, u0, u1, force_reset
    )
    return action


def explore_action(strategy: ExplorationStrategy, ls: LearnerState, sp: int,
                   rng) -> int:
    """Action choice only, no learning update.

    Uniform draws over enabled actions; epsilon-greedy exploits the stored
    policy with probability 1 - epsilon (using the live, decayed epsilon
    when `strategy` matches the learner's kind); optimistic is greedy over
    lookahead values with under-visited pairs forced to the optimistic
    value.  Ties go to the lowest action index.
    """
    u0, u1 = rng.random(2)
    s = sp % ls.product.n_mdp
    lo, hi = int(ls.en_off[s]), int(ls.en_off[s + 1])
    n_en = hi - lo
    if strategy.kind == "uniform":
        j = min(int(u0 * n_en), n_en - 1)
        return int(ls.en_act[lo + j])
    if strategy.kind == "epsilon":
        eps = float(ls.fstate[0]) if ls.strategy.kind == "epsilon" else strategy.epsilon
        if u0 < eps:
            j = min(int(u1 * n_en), n_en - 1)
            return int(ls.en_act[lo + j])
        return int(ls.policy[sp])
    opt_value = (strategy.optimistic_value if strategy.optimistic_value is not None
                 else ls.scheme.wg / (1.0 - ls.gamma))
    best, action = -np.inf, -1
    q = sp // ls.product.n_mdp
    for k in range(lo, hi):
        a = int(ls.en_act[k])
        if ls.counts_sa[s, a] < strategy.visit_threshold:
            qv = opt_value
        else:
            qv = _td_python._lookahead(
                ls.utilities, ls.visited, ls.w, ls.counts_sa, ls.counts_succ,
                ls.dra_next_flat, ls.product.n_mdp, s, a, q,
            )
        if qv > best:
            best, action = qv, a
    return action


def run_trials(product: ProductMdp, ls: LearnerState, trials: int,
               steps_per_trial: int, seed: int, backend: str | None = None,
               start_state: int | None = None):
    """Run `trials` episodes of online learning against the hidden true model.

    Trial boundaries force a Rabin reset.  Returns (ls, TrialLog); `ls` is
    the same object, mutated.  The final environment state is stored in
    `ls.current_state` so learning can be resumed.
    """
    if product is not ls.product:
        raise ValueError("learner state was created for a different product")
    backend = backend or default_backend()
    if backend == "cython" and not HAVE_COMPILED_KERNEL:
        raise RuntimeError("compiled kernel requested but not available")
    if backend not in ("cython", "python"):
        raise ValueError(f"unknown backend {backend!r}")

    n_steps = trials * steps_per_trial
    rng = np.random.default_rng(seed)
    env_u = rng.random(n_steps)
    exp_u = rng.random((n_steps, 2))
    tr_off, tr_succ, tr_cum = _env_tables(product)
    i = ls.scheme.pair_index - 1
    g_mask = product.inf_masks[i].astype(np.uint8)
    b_mask = product.fin_masks[i].astype(np.uint8)
    log_g = np.zeros(trials, dtype=np.int64)
    log_b = np.zeros(trials, dtype=np.int64)
    log_resets = np.zeros(trials, dtype=np.int64)
    start = product.initial if start_state is None else start_state

    kernel = _tdcore.run_kernel if backend == "cython" else _td_python.run_kernel
    final = kernel(
        ls.utilities, ls.visited, ls.counts_sa, ls.counts_succ, ls.policy,
        ls.istate, ls.fstate, ls.w, ls.rejecting_sink, ls.dra_next_flat,
        ls.en_off, ls.en_act,
        tr_off, tr_succ, tr_cum,
        g_mask, b_mask,
        env_u, exp_u,
        log_g, log_b, log_resets,
        trials, steps_per_trial,
        product.n_mdp, product.n_dra, product.n_actions,
        ls.alpha, ls.gamma, ls.reset_interval, product.dra.initial,
        _STRAT_CODES[ls.strategy.kind], ls.strategy.epsilon_min,
        ls.strategy.epsilon_decay, ls.strategy.visit_threshold,
        ls.optimistic_value,
        start,
    )
    ls.current_state = int(final)
    log = TrialLog(
        trials=np.arange(trials, dtype=np.int64),
        steps=np.full(trials, steps_per_trial, dtype=np.int64),
        g_visits=log_g, b_visits=log_b, resets=log_resets,
    )
    return ls, log
