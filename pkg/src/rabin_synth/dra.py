"""Deterministic Rabin automata: construction, HOA import, lasso acceptance.

Letters are bitmasks over a caller-supplied atom ordering so that MDP labels
and automaton input align bit-exactly.  Acceptance is state-based: a run is
accepting iff for some pair, the states visited infinitely often meet the
pair's `inf` set and avoid its `fin` set.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import ltl
from .errors import HoaError, UnsupportedHoaFeature

__all__ = [
    "RabinPair", "Dra", "dra_step", "accepts_lasso", "parse_hoa",
    "translate_fragment", "align_dra", "letter_mask",
]


@dataclass(frozen=True)
class RabinPair:
    inf_states: frozenset[int]   # visit infinitely often
    fin_states: frozenset[int]   # visit finitely often


@dataclass
class Dra:
    """Deterministic Rabin automaton over the alphabet 2^atom_order.

    `delta` is a dense (n_states, 2**len(atom_order)) table; totality and
    determinism are structural.  Immutable after construction by convention.
    """

    atom_order: tuple[str, ...]
    n_states: int
    initial: int
    delta: np.ndarray
    pairs: tuple[RabinPair, ...]
    _atom_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        n_letters = 1 << len(self.atom_order)
        if self.delta.shape != (self.n_states, n_letters):
            raise ValueError(
                f"delta shape {self.delta.shape} != ({self.n_states}, {n_letters})"
            )
        if not (0 <= self.initial < self.n_states):
            raise ValueError("initial state out of range")
        if self.n_states > 0 and (self.delta.min() < 0 or self.delta.max() >= self.n_states):
            raise ValueError("delta entries out of range (transition table not total)")
        if not self.pairs:
            raise ValueError("a Rabin automaton needs at least one acceptance pair")
        for k, pair in enumerate(self.pairs):
            for q in pair.inf_states | pair.fin_states:
                if not (0 <= q < self.n_states):
                    raise ValueError(f"pair {k + 1} references state {q} out of range")
            if pair.inf_states & pair.fin_states:
                warnings.warn(
                    f"acceptance pair {k + 1} has overlapping inf/fin sets",
                    stacklevel=3,
                )
        self._atom_index = {a: i for i, a in enumerate(self.atom_order)}

    @property
    def n_letters(self):
        return 1 << len(self.atom_order)

    def letter_mask(self, letter) -> int:
        """Bitmask of a letter given as a collection of atom names."""
        mask = 0
        for name in letter:
            try:
                mask |= 1 << self._atom_index[name]
            except KeyError:
                raise KeyError(f"atom {name!r} not in automaton atom order") from None
        return mask


def letter_mask(atom_order, letter) -> int:
    index = {a: i for i, a in enumerate(atom_order)}
    mask = 0
    for name in letter:
        mask |= 1 << index[name]
    return mask


def dra_step(d: Dra, q: int, letter) -> int:
    """Unique successor of `q` on `letter` (a collection of atom names)."""
    return int(d.delta[q, d.letter_mask(letter)])


def accepts_lasso(d: Dra, prefix, cycle) -> bool:
    """Acceptance of the ultimately periodic word prefix . cycle^omega.

    Simulates the prefix, then iterates the cycle until a (state, cycle
    position) pair repeats; the states on that final loop are exactly the
    ones visited infinitely often.
    """
    cycle = list(cycle)
    if not cycle:
        raise ValueError("cycle must be nonempty")
    q = d.initial
    for letter in prefix:
        q = int(d.delta[q, d.letter_mask(letter)])
    cycle_masks = [d.letter_mask(letter) for letter in cycle]
    seen = {}
    trail = []
    pos = 0
    while (q, pos) not in seen:
        seen[(q, pos)] = len(trail)
        trail.append(q)
        q = int(d.delta[q, cycle_masks[pos]])
        pos = (pos + 1) % len(cycle_masks)
    inf_set = set(trail[seen[(q, pos)]:])
    return any(
        inf_set & pair.inf_states and not inf_set & pair.fin_states
        for pair in d.pairs
    )


def align_dra(d: Dra, atom_order) -> Dra:
    """Re-express `d` over a larger atom ordering; extra atoms are ignored.

    Every atom of `d` must appear in `atom_order`.
    """
    atom_order = tuple(atom_order)
    if atom_order == d.atom_order:
        return d
    missing = set(d.atom_order) - set(atom_order)
    if missing:
        raise KeyError(f"atoms {sorted(missing)} not present in target atom order")
    positions = [atom_order.index(a) for a in d.atom_order]
    n_letters = 1 << len(atom_order)
    letters = np.arange(n_letters)
    projected = np.zeros(n_letters, dtype=np.int64)
    for bit, pos in enumerate(positions):
        projected |= ((letters >> pos) & 1) << bit
    delta = d.delta[:, projected].astype(np.int32)
    return Dra(atom_order, d.n_states, d.initial, delta, d.pairs)


# --- HOA v1 import ----------------------------------------------------------

_HOA_ACC_TOKEN = re.compile(r"Fin\(\s*(\d+)\s*\)|Inf\(\s*(\d+)\s*\)|[&|()]|\s+")


def _parse_rabin_acceptance(n_sets, cond_text):
    """Parse an HOA acceptance condition as a disjunction of Fin&Inf pairs.

    Returns a list of (fin_set_index, inf_set_index).  Any pairing of set
    indices is allowed; anything not of Rabin shape is rejected.
    """
    tokens = []
    pos = 0
    while pos < len(cond_text):
        m = _HOA_ACC_TOKEN.match(cond_text, pos)
        if m is None:
            raise HoaError(f"bad acceptance condition near {cond_text[pos:pos + 12]!r}")
        tok = m.group().strip()
        if tok:
            tokens.append((tok, m.group(1), m.group(2)))
        pos = m.end()

    # strip balanced parens around each disjunct, then split on top-level '|'
    def shape_error():
        return HoaError(
            "acceptance condition is not a disjunction of Fin(i)&Inf(j) Rabin pairs"
        )

    disjuncts, cur, depth = [], [], 0
    for tok in tokens:
        if tok[0] == "(":
            depth += 1
        elif tok[0] == ")":
            depth -= 1
            if depth < 0:
                raise shape_error()
        elif tok[0] == "|" and depth == 0:
            disjuncts.append(cur)
            cur = []
            continue
        cur.append(tok)
    if depth != 0:
        raise shape_error()
    disjuncts.append(cur)

    pairs = []
    for disj in disjuncts:
        parts = [t for t in disj if t[0] not in "()"]
        if len(parts) != 3 or parts[1][0] != "&":
            raise shape_error()
        fin = inf = None
        for t in (parts[0], parts[2]):
            if t[1] is not None:
                fin = int(t[1])
            elif t[2] is not None:
                inf = int(t[2])
        if fin is None or inf is None:
            raise shape_error()
        if fin >= n_sets or inf >= n_sets:
            raise HoaError("acceptance set index out of range")
        pairs.append((fin, inf))
    if not pairs:
        raise shape_error()
    return pairs


class _LabelExpr:
    """Recursive-descent parser for HOA edge labels: t, f, !, &, |, ints, parens."""

    def __init__(self, text):
        self.toks = re.findall(r"\d+|[tf!&|()]", text.replace(" ", ""))
        if "".join(self.toks) != text.replace(" ", ""):
            raise HoaError(f"bad label expression {text!r}")
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def parse(self):
        node = self.parse_or()
        if self.peek() is not None:
            raise HoaError("trailing tokens in label expression")
        return node

    def parse_or(self):
        node = self.parse_and()
        while self.peek() == "|":
            self.i += 1
            node = ("or", node, self.parse_and())
        return node

    def parse_and(self):
        node = self.parse_not()
        while self.peek() == "&":
            self.i += 1
            node = ("and", node, self.parse_not())
        return node

    def parse_not(self):
        if self.peek() == "!":
            self.i += 1
            return ("not", self.parse_not())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok is None:
            raise HoaError("label expression ended unexpectedly")
        self.i += 1
        if tok == "(":
            node = self.parse_or()
            if self.peek() != ")":
                raise HoaError("unbalanced parenthesis in label expression")
            self.i += 1
            return node
        if tok == "t":
            return ("true",)
        if tok == "f":
            return ("false",)
        if tok.isdigit():
            return ("ap", int(tok))
        raise HoaError(f"unexpected token {tok!r} in label expression")


def _eval_label(node, letter):
    op = node[0]
    if op == "true":
        return True
    if op == "false":
        return False
    if op == "ap":
        return bool((letter >> node[1]) & 1)
    if op == "not":
        return not _eval_label(node[1], letter)
    if op == "and":
        return _eval_label(node[1], letter) and _eval_label(node[2], letter)
    return _eval_label(node[1], letter) or _eval_label(node[2], letter)


def parse_hoa(text: str, atom_order) -> Dra:
    """Import a deterministic Rabin automaton from HOA v1 text.

    Supported subset: state-based acceptance, explicitly labeled edges, and
    an `Acceptance:` condition that is a disjunction of Fin/Inf Rabin pairs.
    The automaton's AP list must be a subset of `atom_order`; letters are
    completed over the full ordering by ignoring the extra atoms.
    """
    atom_order = tuple(atom_order)
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("/*")]
    try:
        body_at = lines.index("--BODY--")
    except ValueError:
        raise HoaError("missing --BODY-- marker") from None
    header, body = lines[:body_at], lines[body_at + 1:]
    if body and body[-1] == "--END--":
        body = body[:-1]

    n_states = start = None
    aps = None
    acc_pairs = None
    if not header or not header[0].replace(" ", "").startswith("HOA:v1"):
        raise HoaError("not an HOA v1 header")
    for ln in header[1:]:
        key, _, rest = ln.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "States":
            n_states = int(rest)
        elif key == "Start":
            if "&" in rest or len(rest.split()) != 1:
                raise UnsupportedHoaFeature("only a single initial state is supported")
            start = int(rest)
        elif key == "AP":
            parts = rest.split(None, 1)
            count = int(parts[0])
            names = re.findall(r'"([^"]*)"', parts[1] if len(parts) > 1 else "")
            if len(names) != count:
                raise HoaError(f"AP header announces {count} names, found {len(names)}")
            aps = names
        elif key == "Acceptance":
            parts = rest.split(None, 1)
            acc_pairs = _parse_rabin_acceptance(
                int(parts[0]), parts[1] if len(parts) > 1 else ""
            )
        elif key == "Alias":
            raise UnsupportedHoaFeature("aliases are not supported")
        # acc-name, name, tool, properties: informational, ignored
    if n_states is None or start is None or aps is None or acc_pairs is None:
        raise HoaError("missing required header (States/Start/AP/Acceptance)")
    missing = [a for a in aps if a not in atom_order]
    if missing:
        raise HoaError(f"HOA atoms {missing} not in the supplied atom order")

    n_ap = len(aps)
    state_re = re.compile(r"^State:\s*(\d+)\s*(\"[^\"]*\")?\s*(\{[^}]*\})?\s*$")
    edge_re = re.compile(r"^\[(?P<label>[^\]]*)\]\s*(?P<dest>\d+)\s*(?P<acc>\{[^}]*\})?\s*$")

    state_sets = {}
    edges = {s: [] for s in range(n_states)}
    current = None
    for ln in body:
        sm = state_re.match(ln)
        if sm:
            current = int(sm.group(1))
            if current >= n_states:
                raise HoaError(f"state {current} out of range")
            sets = sm.group(3)
            state_sets[current] = (
                {int(x) for x in sets.strip("{}").split()} if sets else set()
            )
            continue
        em = edge_re.match(ln)
        if em:
            if current is None:
                raise HoaError("edge before any State: line")
            if em.group("acc"):
                raise UnsupportedHoaFeature(
                    "transition-based acceptance is not supported"
                )
            expr = _LabelExpr(em.group("label")).parse()
            edges[current].append((expr, int(em.group("dest"))))
            continue
        raise HoaError(f"unparsable body line {ln!r}")
    if set(state_sets) != set(range(n_states)):
        raise HoaError("body does not define every announced state")

    # evaluate labels over the HOA AP alphabet, checking determinism/totality
    hoa_delta = np.full((n_states, 1 << n_ap), -1, dtype=np.int64)
    for s in range(n_states):
        for letter in range(1 << n_ap):
            dest = None
            for expr, d_ in edges[s]:
                if _eval_label(expr, letter):
                    if dest is not None:
                        raise HoaError(f"state {s} is nondeterministic on letter {letter}")
                    dest = d_
            if dest is None:
                raise HoaError(f"state {s} has no transition on letter {letter}")
            if dest >= n_states:
                raise HoaError(f"edge target {dest} out of range")
            hoa_delta[s, letter] = dest

    # lift to the full atom ordering by projecting each full letter
    positions = [atom_order.index(a) for a in aps]
    n_letters = 1 << len(atom_order)
    letters = np.arange(n_letters)
    projected = np.zeros(n_letters, dtype=np.int64)
    for bit, pos in enumerate(positions):
        projected |= ((letters >> pos) & 1) << bit
    delta = hoa_delta[:, projected].astype(np.int32)

    pairs = tuple(
        RabinPair(
            inf_states=frozenset(s for s in range(n_states) if inf in state_sets[s]),
            fin_states=frozenset(s for s in range(n_states) if fin in state_sets[s]),
        )
        for fin, inf in acc_pairs
    )
    return Dra(atom_order, n_states, start, delta, pairs)


# --- direct construction for the GF/FG/G fragment ---------------------------

def _eval_prop(f, letter, atom_index):
    """Truth of a propositional formula on a single letter bitmask."""
    if isinstance(f, ltl.Atom):
        return bool((letter >> atom_index[f.name]) & 1)
    if isinstance(f, ltl.TrueConst):
        return True
    if isinstance(f, ltl.FalseConst):
        return False
    if isinstance(f, ltl.Not):
        return not _eval_prop(f.child, letter, atom_index)
    if isinstance(f, ltl.And):
        return all(_eval_prop(c, letter, atom_index) for c in f.children)
    if isinstance(f, ltl.Or):
        return _eval_prop(f.left, letter, atom_index) or _eval_prop(f.right, letter, atom_index)
    if isinstance(f, ltl.Implies):
        return (not _eval_prop(f.left, letter, atom_index)) or _eval_prop(f.right, letter, atom_index)
    raise TypeError(f"not propositional: {f!r}")


def _eval_windowed(f, seq, idx, atom_index):
    """Truth at position `idx` of a letter sequence, with X moving the index."""
    if isinstance(f, ltl.Next):
        return _eval_windowed(f.child, seq, idx + 1, atom_index)
    if isinstance(f, ltl.Not):
        return not _eval_windowed(f.child, seq, idx, atom_index)
    if isinstance(f, ltl.And):
        return all(_eval_windowed(c, seq, idx, atom_index) for c in f.children)
    if isinstance(f, ltl.Or):
        return _eval_windowed(f.left, seq, idx, atom_index) or _eval_windowed(f.right, seq, idx, atom_index)
    if isinstance(f, ltl.Implies):
        return (not _eval_windowed(f.left, seq, idx, atom_index)) or _eval_windowed(f.right, seq, idx, atom_index)
    return _eval_prop(f, seq[idx], atom_index)


_SINK = "sink"


def translate_fragment(frag: ltl.FragmentSpec, atom_order) -> Dra:
    """Build a one-pair DRA for a fragment formula.

    The automaton is the reachable product of three monitors:

    * a safety monitor that buffers the last `d` letters (d = X-depth of the
      safety formula) and falls into an absorbing sink on violation,
    * a round-robin counter over the recurrence goals with a distinguished
      round-complete value,
    * a stability watcher tracking whether the last letter met every
      stability goal.

    The single pair marks round-complete/watcher-ok states as `inf` and the
    sink plus watcher-bad states as `fin`.  No minimization is attempted;
    correctness is by language, not by size.
    """
    atom_order = tuple(atom_order)
    if frag.is_empty():
        raise ValueError("fragment spec has no conjuncts")
    formula_atoms = ltl.atoms(frag.to_formula())
    missing = set(formula_atoms) - set(atom_order)
    if missing:
        raise KeyError(f"formula atoms {sorted(missing)} not in atom order")
    atom_index = {a: i for i, a in enumerate(atom_order)}

    safety = frag.safety
    depth = ltl.next_depth(safety) if safety is not None else 0
    if safety is not None:
        safe_mask = 0
        for a in ltl.atoms(safety):
            safe_mask |= 1 << atom_index[a]
    goals = frag.recurrence
    n_goals = len(goals)
    stability_goal = ltl.make_and(frag.stability) if frag.stability else None

    def step_safety(mg, letter):
        if safety is None:
            return None
        if mg == _SINK:
            return _SINK
        window = mg[1]
        pm = letter & safe_mask
        if mg[0] == "fill":
            window = window + (pm,)
            return ("win", window) if len(window) == depth else ("fill", window)
        seq = window + (pm,)
        if not _eval_windowed(safety, seq, 0, atom_index):
            return _SINK
        return ("win", seq[1:])

    def step_counter(cnt, letter):
        if n_goals == 0:
            return "rc"
        c = 0 if cnt == "rc" else cnt
        if _eval_prop(goals[c], letter, atom_index):
            c += 1
            return "rc" if c == n_goals else c
        return c

    def step_watcher(_w, letter):
        if stability_goal is None:
            return "ok"
        return "ok" if _eval_prop(stability_goal, letter, atom_index) else "bad"

    if safety is None:
        mg0 = None
    else:
        mg0 = ("win", ()) if depth == 0 else ("fill", ())
    start = (mg0, 0 if n_goals else "rc", "bad" if stability_goal is not None else "ok")

    n_letters = 1 << len(atom_order)
    index = {start: 0}
    order = [start]
    rows = []
    sink_idx = None
    queue = [start]
    while queue:
        st = queue.pop(0)
        if st == _SINK:
            rows.append(np.full(n_letters, index[_SINK], dtype=np.int32))
            continue
        mg, cnt, w = st
        row = np.empty(n_letters, dtype=np.int32)
        for letter in range(n_letters):
            mg2 = step_safety(mg, letter)
            nxt = _SINK if mg2 == _SINK else (mg2, step_counter(cnt, letter), step_watcher(w, letter))
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
                if nxt == _SINK:
                    sink_idx = index[nxt]
            row[letter] = index[nxt]
        rows.append(row)

    delta = np.vstack(rows)
    inf_states = frozenset(
        i for i, st in enumerate(order)
        if st != _SINK and st[1] == "rc" and st[2] == "ok"
    )
    fin_states = set(
        i for i, st in enumerate(order) if st != _SINK and st[2] == "bad"
    )
    if sink_idx is not None:
        fin_states.add(sink_idx)
    pair = RabinPair(inf_states=inf_states, fin_states=frozenset(fin_states))
    return Dra(atom_order, len(order), 0, delta, (pair,))


def dra_for_formula(f: ltl.Formula, atom_order) -> Dra:
    """Translate `f` if it lies in the supported fragment, else raise."""
    frag = ltl.to_fragment(f)
    if frag is None:
        raise ValueError(
            "formula is outside the directly translatable fragment; "
            "import a Rabin automaton in HOA format instead"
        )
    return translate_fragment(frag, atom_order)
