"""Probability-one verification, brute-force oracle, and trace simulation.

A stationary policy induces a Markov chain over the product; splitting its
reachable states into transient states and bottom strongly connected
components (the recurrent classes) decides almost-sure satisfaction: some
acceptance pair must have every reachable `fin` state transient while every
recurrent class meets its `inf` set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceTooLargeError
from .mdp import StationaryPolicy
from .product import ProductMdp, RewardScheme, reward_vector
from .solver import greedy_policy, utility_bound

__all__ = [
    "InducedChain", "ChainDecomposition", "SatisfactionResult", "TraceRecord",
    "induced_chain", "decompose", "satisfies_prob_one", "brute_force_best",
    "exists_prob_one_policy", "estimate_satisfaction", "simulate",
]


@dataclass
class InducedChain:
    """Markov chain of a stationary policy, restricted to reachable states."""

    initial: int
    nodes: tuple[int, ...]                    # reachable product states, ascending
    succ: dict                                # node -> tuple[(node, prob), ...]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass
class ChainDecomposition:
    transient: frozenset[int]
    recurrent_classes: tuple[frozenset[int], ...]


def _policy_choice(product: ProductMdp, policy, p: int, step: int = 0) -> int:
    if isinstance(policy, StationaryPolicy):
        return policy[p]
    if hasattr(policy, "action_index"):
        return policy.action_index(p, step)
    return policy(p, step)


def induced_chain(product: ProductMdp, policy: StationaryPolicy) -> InducedChain:
    """Edges (p -> p', P(p, pi(p), p')) over states reachable from the start."""
    if policy.n_states != product.n_states:
        raise ValueError("policy size does not match the product")
    succ = {}
    stack = [product.initial]
    seen = {product.initial}
    while stack:
        p = stack.pop()
        a = policy[p]
        if a not in product.enabled(p):
            raise ValueError(f"policy chooses disabled action at product state {p}")
        row = tuple(product.successors(p, a))
        succ[p] = row
        for t, _ in row:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return InducedChain(product.initial, tuple(sorted(seen)), succ)


def _tarjan_sccs(adj):
    """Iterative Tarjan over adjacency lists; returns SCCs as lists of nodes."""
    n = len(adj)
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack = []
    sccs = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, ei = work.pop()
            if ei == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while ei < len(adj[v]):
                w = adj[v][ei]
                ei += 1
                if index[w] == -1:
                    work.append((v, ei))
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            if lowlink[v] == index[v]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    scc.append(w)
                    if w == v:
                        break
                sccs.append(scc)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return sccs


def _bottom_flags(adj, sccs):
    comp_of = {}
    for ci, scc in enumerate(sccs):
        for v in scc:
            comp_of[v] = ci
    bottom = [True] * len(sccs)
    for v in range(len(adj)):
        cv = comp_of[v]
        for w in adj[v]:
            if comp_of[w] != cv:
                bottom[cv] = False
                break
    return bottom


def decompose(chain: InducedChain) -> ChainDecomposition:
    """Transient states and recurrent classes (closed bottom SCCs)."""
    pos = {p: i for i, p in enumerate(chain.nodes)}
    adj = [[pos[t] for t, _ in chain.succ[p]] for p in chain.nodes]
    sccs = _tarjan_sccs(adj)
    bottom = _bottom_flags(adj, sccs)
    recurrent = []
    transient = set()
    for scc, is_bottom in zip(sccs, bottom):
        states = frozenset(chain.nodes[i] for i in scc)
        if is_bottom:
            recurrent.append(states)
        else:
            transient.update(states)
    recurrent.sort(key=min)
    return ChainDecomposition(frozenset(transient), tuple(recurrent))


@dataclass
class PairViolation:
    pair_index: int          # 1-based
    case: str                # "1": recurrent class missing inf; "2": recurrent fin state
    witness: tuple           # offending recurrent class or state

    def __str__(self):
        if self.case == "1":
            return (f"pair {self.pair_index}: recurrent class "
                    f"{sorted(self.witness)} never meets the inf set")
        return (f"pair {self.pair_index}: fin state {self.witness[0]} is recurrent")


@dataclass
class SatisfactionResult:
    prob_one: bool
    witness_pair: int | None          # 1-based
    case: str | None                  # first violated case when not prob-one
    violations: tuple = ()
    decomposition: ChainDecomposition = None
    chain: InducedChain = None

    def report(self) -> dict:
        return {
            "prob_one": self.prob_one,
            "witness_pair": self.witness_pair,
            "case": self.case,
            "recurrent_classes": len(self.decomposition.recurrent_classes),
            "transient": len(self.decomposition.transient),
        }


def satisfies_prob_one(product: ProductMdp, policy: StationaryPolicy) -> SatisfactionResult:
    """Decide almost-sure acceptance of the induced chain.

    True iff for some pair, every *reachable* fin state is transient and
    every recurrent class intersects the pair's inf set.  On failure the
    result lists, per pair, the first violated case.
    """
    chain = induced_chain(product, policy)
    deco = decompose(chain)
    violations = []
    for i in range(product.n_pairs):
        inf_m, fin_m = product.inf_masks[i], product.fin_masks[i]
        case1 = None
        for cls in deco.recurrent_classes:
            if not any(inf_m[p] for p in cls):
                case1 = cls
                break
        case2 = None
        for cls in deco.recurrent_classes:
            for p in cls:
                if fin_m[p]:
                    case2 = p
                    break
            if case2 is not None:
                break
        if case1 is None and case2 is None:
            return SatisfactionResult(True, i + 1, None, (), deco, chain)
        if case1 is not None:
            violations.append(PairViolation(i + 1, "1", tuple(sorted(case1))))
        else:
            violations.append(PairViolation(i + 1, "2", (case2,)))
    first = violations[0]
    return SatisfactionResult(False, None, first.case, tuple(violations), deco, chain)


# --- brute-force oracle -------------------------------------------------------

_POLICY_LIMIT = 10 ** 6


def _policy_space_size(product: ProductMdp) -> int:
    total = 1
    for p in range(product.n_states):
        total *= len(product.enabled(p))
        if total > _POLICY_LIMIT:
            return total
    return total


def brute_force_best(product: ProductMdp, scheme: RewardScheme,
                     gamma: float) -> StationaryPolicy:
    """Optimal policy by exhaustive enumeration with exact evaluation.

    Every stationary policy is evaluated by a direct linear solve of
    (I - gamma * P_pi) U = W; the per-state maximum of those utility vectors
    is the optimal utility, and the returned policy is greedy on it with the
    same tie-breaking as value iteration.  Guarded to at most 10^6 policies.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("discount factor must lie in (0, 1)")
    if _policy_space_size(product) > _POLICY_LIMIT:
        raise InstanceTooLargeError(
            f"policy space exceeds {_POLICY_LIMIT}; brute force refused"
        )
    n = product.n_states
    w = reward_vector(product, scheme)

    rows = np.zeros((n, product.n_actions, n), dtype=np.float64)
    for p in range(n):
        for a in product.enabled(p):
            for t, prob in product.successors(p, a):
                rows[p, a, t] = prob

    enabled_lists = [product.enabled(p) for p in range(n)]
    eye = np.eye(n)
    best_u = np.full(n, -np.inf)
    chunk = []

    def flush(chunk):
        nonlocal best_u
        choices = np.asarray(chunk, dtype=np.int64)
        p_mats = rows[np.arange(n)[None, :], choices, :]
        a_mats = eye[None, :, :] - gamma * p_mats
        u = np.linalg.solve(a_mats, np.broadcast_to(w, (len(chunk), n))[..., None])
        best_u = np.maximum(best_u, u[..., 0].max(axis=0))

    for combo in itertools.product(*enabled_lists):
        chunk.append(combo)
        if len(chunk) == 4096:
            flush(chunk)
            chunk = []
    if chunk:
        flush(chunk)

    q = np.einsum("pat,t->ap", rows, best_u)
    q = w[None, :] + gamma * q
    q[~product.enabled_mask] = -np.inf
    policy = greedy_policy(q, utility_bound(w, gamma))

    # the greedy policy on the optimal utilities must achieve them
    p_great = rows[np.arange(n), list(policy.choices), :]
    u_check = np.linalg.solve(eye - gamma * p_great, w)
    scale = max(1.0, utility_bound(w, gamma))
    if np.max(np.abs(u_check - best_u)) > 1e-7 * scale:
        raise RuntimeError("brute-force greedy policy failed to achieve the "
                           "enumerated optimum; numerical trouble")
    return policy


def exists_prob_one_policy(product: ProductMdp,
                           limit: int = _POLICY_LIMIT):
    """First stationary policy satisfying the Rabin condition a.s., or None.

    Plain enumeration with early exit; intended for small certification
    instances, not production use.
    """
    if _policy_space_size(product) > limit:
        raise InstanceTooLargeError("policy space too large to enumerate")
    enabled_lists = [product.enabled(p) for p in range(product.n_states)]
    for combo in itertools.product(*enabled_lists):
        policy = StationaryPolicy(combo)
        if satisfies_prob_one(product, policy).prob_one:
            return policy
    return None


# --- simulation ----------------------------------------------------------------

@dataclass
class TraceRecord:
    """A simulated product run; row t describes the state before step t."""

    steps: np.ndarray
    mdp_states: np.ndarray
    dra_states: np.ndarray
    actions: list        # action names; "" on the final row
    rewards: np.ndarray
    labels: list         # frozenset of atom names per row

    @property
    def n_rows(self) -> int:
        return len(self.steps)

    def product_states(self, n_mdp: int) -> np.ndarray:
        return self.dra_states * n_mdp + self.mdp_states

    def to_csv(self) -> str:
        lines = ["step,mdp_state,dra_state,action,reward,labels"]
        for i in range(self.n_rows):
            labs = ";".join(sorted(self.labels[i]))
            lines.append(
                f"{self.steps[i]},{self.mdp_states[i]},{self.dra_states[i]},"
                f"{self.actions[i]},{self.rewards[i]!r},{labs}"
            )
        return "\n".join(lines) + "\n"


def _sample_row(row, u: float) -> int:
    acc = 0.0
    for t, p in row:
        acc += p
        if u < acc:
            return t
    return row[-1][0]


def simulate(product: ProductMdp, policy, steps: int, seed: int,
             scheme: RewardScheme | None = None, start: int | None = None) -> TraceRecord:
    """Simulate `steps` policy steps; reproducible for a fixed seed.

    `policy` may be a StationaryPolicy, an object with an
    ``action_index(product_state, step)`` method, or a plain callable with
    that signature.
    """
    rng = np.random.default_rng(seed)
    w = reward_vector(product, scheme) if scheme is not None else np.zeros(product.n_states)
    p = product.initial if start is None else start
    n_mdp = product.n_mdp
    steps_col = np.arange(steps + 1, dtype=np.int64)
    mdp_col = np.empty(steps + 1, dtype=np.int64)
    dra_col = np.empty(steps + 1, dtype=np.int64)
    rew_col = np.empty(steps + 1, dtype=np.float64)
    actions, labels = [], []
    for t in range(steps + 1):
        s, q = p % n_mdp, p // n_mdp
        mdp_col[t], dra_col[t] = s, q
        rew_col[t] = w[p]
        labels.append(product.mdp.labels[s])
        if t == steps:
            actions.append("")
            break
        a = _policy_choice(product, policy, p, t)
        if a not in product.enabled(p):
            raise ValueError(f"policy chooses disabled action at product state {p}")
        actions.append(product.mdp.actions[a])
        p = _sample_row(product.successors(p, a), rng.random())
    return TraceRecord(steps_col, mdp_col, dra_col, actions, rew_col, labels)


def estimate_satisfaction(product: ProductMdp, policy, n_traces: int,
                          horizon: int, burn_in: int, seed: int,
                          pair_index: int | None = None) -> float:
    """Finite-horizon surrogate for almost-sure acceptance.

    A trace passes when, after `burn_in`, it never visits the pair's fin
    states and visits its inf states at least once in every complete window
    of horizon // 4 steps.  This is an empirical proxy, not the measure
    itself; `horizon` must exceed `burn_in`.
    """
    if horizon <= burn_in:
        raise ValueError("horizon must exceed burn_in")
    if pair_index is None:
        if isinstance(policy, StationaryPolicy):
            res = satisfies_prob_one(product, policy)
            pair_index = res.witness_pair if res.witness_pair else 1
        else:
            pair_index = 1
    inf_m = product.inf_masks[pair_index - 1]
    fin_m = product.fin_masks[pair_index - 1]
    window = max(1, horizon // 4)
    passed = 0
    for k in range(n_traces):
        trace = simulate(product, policy, horizon, seed + k)
        pstates = trace.product_states(product.n_mdp)[:horizon]
        tail = pstates[burn_in:]
        if np.any(fin_m[tail]):
            continue
        ok = True
        start = burn_in
        while start + window <= horizon:
            if not np.any(inf_m[pstates[start:start + window]]):
                ok = False
                break
            start += window
        if ok:
            passed += 1
    return passed / n_traces if n_traces else math.nan
