"""Independent reference implementations used only by the tests.

Nothing here touches the package's automaton, solver, or chain code paths:
LTL truth on ultimately periodic words is computed straight from the
semantics by fixpoint iteration over lasso positions, and communicating
classes come from a transitive-closure construction.  Keeping these
separate is the point; do not "simplify" them to call the package.
"""

from __future__ import annotations

import numpy as np

from rabin_synth import ltl


def _next_index(i, length, cycle_start):
    return i + 1 if i + 1 < length else cycle_start


def lasso_truth(formula, prefix, cycle):
    """Truth of `formula` at position 0 of the word prefix . cycle^omega.

    Letters are collections of atom names.  Fixpoints for U/F/G are solved
    by iterating over the finitely many lasso positions.
    """
    word = [frozenset(l) for l in prefix] + [frozenset(l) for l in cycle]
    length, start = len(word), len(prefix)
    if not cycle:
        raise ValueError("cycle must be nonempty")

    def sat(f):
        if isinstance(f, ltl.Atom):
            return [f.name in word[i] for i in range(length)]
        if isinstance(f, ltl.TrueConst):
            return [True] * length
        if isinstance(f, ltl.FalseConst):
            return [False] * length
        if isinstance(f, ltl.Not):
            return [not v for v in sat(f.child)]
        if isinstance(f, ltl.And):
            rows = [sat(c) for c in f.children]
            return [all(r[i] for r in rows) for i in range(length)]
        if isinstance(f, ltl.Or):
            a, b = sat(f.left), sat(f.right)
            return [a[i] or b[i] for i in range(length)]
        if isinstance(f, ltl.Implies):
            a, b = sat(f.left), sat(f.right)
            return [(not a[i]) or b[i] for i in range(length)]
        if isinstance(f, ltl.Next):
            a = sat(f.child)
            return [a[_next_index(i, length, start)] for i in range(length)]
        if isinstance(f, ltl.Until):
            a, b = sat(f.left), sat(f.right)
            v = [False] * length
            for _ in range(length + 1):
                v = [b[i] or (a[i] and v[_next_index(i, length, start)])
                     for i in range(length)]
            return v
        if isinstance(f, ltl.Eventually):
            b = sat(f.child)
            v = [False] * length
            for _ in range(length + 1):
                v = [b[i] or v[_next_index(i, length, start)] for i in range(length)]
            return v
        if isinstance(f, ltl.Always):
            a = sat(f.child)
            v = [True] * length
            for _ in range(length + 1):
                v = [a[i] and v[_next_index(i, length, start)] for i in range(length)]
            return v
        raise TypeError(f"unhandled node {f!r}")

    return sat(formula)[0]


def lasso_truth_many(formula, letters, prefix_len, atom_order):
    """Vectorized lasso_truth over many words of one (prefix, cycle) shape.

    `letters` is an int array (n_words, length) of letter bitmasks over
    `atom_order`; returns a boolean array of truths at position 0.
    """
    n, length = letters.shape
    start = prefix_len
    index = {a: i for i, a in enumerate(atom_order)}
    succ = np.array([_next_index(i, length, start) for i in range(length)])

    def sat(f):
        if isinstance(f, ltl.Atom):
            return (letters >> index[f.name]) & 1 == 1
        if isinstance(f, ltl.TrueConst):
            return np.ones((n, length), dtype=bool)
        if isinstance(f, ltl.FalseConst):
            return np.zeros((n, length), dtype=bool)
        if isinstance(f, ltl.Not):
            return ~sat(f.child)
        if isinstance(f, ltl.And):
            out = sat(f.children[0])
            for c in f.children[1:]:
                out = out & sat(c)
            return out
        if isinstance(f, ltl.Or):
            return sat(f.left) | sat(f.right)
        if isinstance(f, ltl.Implies):
            return ~sat(f.left) | sat(f.right)
        if isinstance(f, ltl.Next):
            return sat(f.child)[:, succ]
        if isinstance(f, ltl.Until):
            a, b = sat(f.left), sat(f.right)
            v = np.zeros((n, length), dtype=bool)
            for _ in range(length + 1):
                v = b | (a & v[:, succ])
            return v
        if isinstance(f, ltl.Eventually):
            b = sat(f.child)
            v = np.zeros((n, length), dtype=bool)
            for _ in range(length + 1):
                v = b | v[:, succ]
            return v
        if isinstance(f, ltl.Always):
            a = sat(f.child)
            v = np.ones((n, length), dtype=bool)
            for _ in range(length + 1):
                v = a & v[:, succ]
            return v
        raise TypeError(f"unhandled node {f!r}")

    return sat(formula)[:, 0]


def mask_to_letter(mask, atom_order):
    return frozenset(a for i, a in enumerate(atom_order) if (mask >> i) & 1)


def communicating_classes(n, edges):
    """(transient set, recurrent classes) via boolean transitive closure.

    `edges[u]` lists the successors of node u (0..n-1).  A node is recurrent
    iff it can reach only nodes that reach it back; recurrent classes are
    the equivalence classes of mutual reachability restricted to recurrent
    nodes.
    """
    reach = np.zeros((n, n), dtype=bool)
    for u in range(n):
        reach[u, u] = True
        for v in edges[u]:
            reach[u, v] = True
    for mid in range(n):
        reach |= reach[:, mid:mid + 1] & reach[mid:mid + 1, :]
    mutual = reach & reach.T
    recurrent_nodes = [u for u in range(n) if all(mutual[u, v] for v in range(n) if reach[u, v])]
    transient = frozenset(range(n)) - frozenset(recurrent_nodes)
    classes = []
    seen = set()
    for u in recurrent_nodes:
        if u in seen:
            continue
        cls = frozenset(v for v in recurrent_nodes if mutual[u, v])
        seen |= cls
        classes.append(cls)
    classes.sort(key=min)
    return transient, tuple(classes)


def _letter_grid(n_letters, length):
    """All words of `length` letters as an int16 array (n_letters**length, length)."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int16)
    codes = np.arange(n_letters ** length)
    cols = [
        ((codes // (n_letters ** (length - 1 - j))) % n_letters).astype(np.int16)
        for j in range(length)
    ]
    return np.stack(cols, axis=1)


def _dra_accept_table(dra, cycles):
    """accept[cycle, q]: does cycle^omega accept when entered at state q?

    Vectorized over the (cycle, start state) grid: one full pass of the
    cycle is a function on states with a visited-set bitmask; iterating it
    n_states times reaches the loop, and n_states more passes cover it.
    """
    n_cyc, c_len = cycles.shape
    n_q = dra.n_states
    pass_next = np.empty((n_cyc, n_q), dtype=np.int64)
    pass_mask = np.zeros((n_cyc, n_q), dtype=np.int64)
    for q in range(n_q):
        state = np.full(n_cyc, q, dtype=np.int64)
        mask = np.zeros(n_cyc, dtype=np.int64)
        for pos in range(c_len):
            state = dra.delta[state, cycles[:, pos]].astype(np.int64)
            mask |= np.int64(1) << state
        pass_next[:, q] = state
        pass_mask[:, q] = mask

    grid = np.tile(np.arange(n_q, dtype=np.int64), (n_cyc, 1))
    rows = np.arange(n_cyc)[:, None]
    for _ in range(n_q):
        grid = pass_next[rows, grid]
    inf_mask = np.zeros((n_cyc, n_q), dtype=np.int64)
    for _ in range(n_q):
        inf_mask |= pass_mask[rows, grid]
        grid = pass_next[rows, grid]

    accept = np.zeros((n_cyc, n_q), dtype=bool)
    for pair in dra.pairs:
        inf_bits = np.int64(0)
        for q in pair.inf_states:
            inf_bits |= np.int64(1) << q
        fin_bits = np.int64(0)
        for q in pair.fin_states:
            fin_bits |= np.int64(1) << q
        accept |= ((inf_mask & inf_bits) != 0) & ((inf_mask & fin_bits) == 0)
    return accept


def exhaustive_lasso_disagreements(dra, formula, atom_order, max_prefix=4,
                                   max_cycle=4, chunk=2_000_000):
    """Count lassos where `dra` and direct LTL semantics disagree.

    Exhaustive over every prefix of length <= max_prefix and every
    nonempty cycle of length <= max_cycle over the alphabet 2^atom_order.
    """
    n_letters = 1 << len(atom_order)
    bad = 0
    for p_len in range(max_prefix + 1):
        prefixes = _letter_grid(n_letters, p_len)
        q_end = np.full(len(prefixes), dra.initial, dtype=np.int64)
        for pos in range(p_len):
            q_end = dra.delta[q_end, prefixes[:, pos]].astype(np.int64)
        for c_len in range(1, max_cycle + 1):
            cycles = _letter_grid(n_letters, c_len)
            accept = _dra_accept_table(dra, cycles)
            n_pairs_total = len(prefixes) * len(cycles)
            for lo in range(0, n_pairs_total, chunk):
                hi = min(lo + chunk, n_pairs_total)
                idx = np.arange(lo, hi)
                pre_i, cyc_i = idx // len(cycles), idx % len(cycles)
                letters = np.concatenate(
                    [prefixes[pre_i], cycles[cyc_i]], axis=1
                )
                truth = lasso_truth_many(formula, letters, p_len, atom_order)
                dra_says = accept[cyc_i, q_end[pre_i]]
                bad += int(np.sum(truth != dra_says))
    return bad


# --- random instances ---------------------------------------------------------

def random_mdp(rng, n_states, n_actions, n_atoms, max_succ=3,
               full_enabled=False):
    """A valid random labeled MDP with well-separated probabilities."""
    from rabin_synth.mdp import LabeledMdp

    atoms = tuple(chr(ord("a") + i) for i in range(n_atoms))
    labels = tuple(
        frozenset(a for i, a in enumerate(atoms) if rng.random() < 0.4)
        for _ in range(n_states)
    )
    enabled = []
    for _ in range(n_states):
        if full_enabled:
            enabled.append(tuple(range(n_actions)))
        else:
            k = int(rng.integers(1, n_actions + 1))
            enabled.append(tuple(sorted(rng.choice(n_actions, size=k, replace=False).tolist())))
    transitions = {}
    for s in range(n_states):
        for a in enabled[s]:
            k = int(rng.integers(1, min(max_succ, n_states) + 1))
            succ = sorted(rng.choice(n_states, size=k, replace=False).tolist())
            raw = rng.random(k) + 0.3
            probs = raw / raw.sum()
            transitions[(s, a)] = tuple(
                (int(t), float(p)) for t, p in zip(succ, probs)
            )
    return LabeledMdp(
        atoms=atoms,
        actions=tuple(f"act{j}" for j in range(n_actions)),
        labels=labels,
        enabled=tuple(enabled),
        transitions=transitions,
        initial=int(rng.integers(n_states)),
    )


def random_dra(rng, n_states, n_atoms, n_pairs=1, allow_empty_inf=False):
    """A random total DRA over the same atom alphabet as random_mdp."""
    from rabin_synth.dra import Dra, RabinPair

    atoms = tuple(chr(ord("a") + i) for i in range(n_atoms))
    n_letters = 1 << n_atoms
    delta = rng.integers(0, n_states, size=(n_states, n_letters)).astype(np.int32)
    pairs = []
    for _ in range(n_pairs):
        min_inf = 0 if allow_empty_inf else 1
        inf_size = int(rng.integers(min_inf, n_states + 1))
        inf = frozenset(rng.choice(n_states, size=inf_size, replace=False).tolist())
        rest = [q for q in range(n_states) if q not in inf]
        fin_size = int(rng.integers(0, len(rest) + 1)) if rest else 0
        fin = frozenset(rng.choice(rest, size=fin_size, replace=False).tolist()) \
            if fin_size else frozenset()
        pairs.append(RabinPair(inf_states=inf, fin_states=fin))
    return Dra(atoms, n_states, int(rng.integers(n_states)), delta, tuple(pairs))


def random_product(rng, max_product_states=12, n_actions=None, n_atoms=2,
                   full_enabled=False, n_pairs=1):
    """A random product MDP with |S| * |Q| <= max_product_states."""
    from rabin_synth.product import build_product

    while True:
        n_s = int(rng.integers(2, 7))
        n_q = int(rng.integers(1, 5))
        if n_s * n_q <= max_product_states:
            break
    n_a = n_actions or int(rng.integers(2, 4))
    mdp = random_mdp(rng, n_s, n_a, n_atoms, full_enabled=full_enabled)
    dra = random_dra(rng, n_q, n_atoms, n_pairs=n_pairs)
    return build_product(mdp, dra)
