"""LTL abstract syntax, concrete-syntax parser, and fragment classification.

The supported concrete syntax uses `!`, `&`, `|`, `->` for Boolean
connectives, `G`/`[]` (always), `F`/`<>` (eventually), `X` (next) and the
binary `U` (until), with precedence  unary > U > & > | > ->.  Atoms are
identifiers matching ``[A-Za-z_][A-Za-z0-9_]*``; the single letters
``G F X U`` and the words ``true``/``false`` are reserved.

Conjunction is n-ary internally (nested `&` chains are flattened), which is
what makes fragment detection a matter of scanning top-level conjuncts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import LtlSyntaxError

__all__ = [
    "Formula", "TrueConst", "FalseConst", "Atom", "Not", "Next",
    "Eventually", "Always", "And", "Or", "Implies", "Until",
    "FragmentSpec", "parse_ltl", "format_ltl", "atoms", "to_fragment",
    "is_propositional", "next_depth", "make_and",
]

ATOM_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
RESERVED = {"G", "F", "X", "U", "true", "false"}


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True)
class FalseConst(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not ATOM_RE.fullmatch(self.name) or self.name in RESERVED:
            raise ValueError(f"invalid atom name {self.name!r}")


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula


@dataclass(frozen=True)
class Always(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    children: tuple[Formula, ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("And needs at least two conjuncts")


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


def make_and(conjuncts) -> Formula:
    """Build an n-ary conjunction, flattening nested `And`s; unwraps singletons."""
    flat = []
    for c in conjuncts:
        if isinstance(c, And):
            flat.extend(c.children)
        else:
            flat.append(c)
    if not flat:
        raise ValueError("empty conjunction")
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


# --- tokenizer -------------------------------------------------------------

_TOKEN_SPEC = [
    ("ARROW", r"->"),
    ("BOX", r"\[\]"),
    ("DIAMOND", r"<>"),
    ("NOT", r"!"),
    ("AND", r"&"),
    ("OR", r"\|"),
    ("LPAR", r"\("),
    ("RPAR", r"\)"),
    ("WORD", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("WS", r"\s+"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LtlSyntaxError(f"unknown token {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "WS":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind, what):
        tok = self.advance()
        if tok[0] != kind:
            raise LtlSyntaxError(f"expected {what}, found {tok[1] or 'end of input'!r}", tok[2])
        return tok

    # implies := or ('->' implies)?        right associative
    def parse_implies(self):
        left = self.parse_or()
        if self.peek()[0] == "ARROW":
            self.advance()
            return Implies(left, self.parse_implies())
        return left

    # or := and ('|' and)*                 left associative
    def parse_or(self):
        node = self.parse_and()
        while self.peek()[0] == "OR":
            self.advance()
            node = Or(node, self.parse_and())
        return node

    # and := until ('&' until)*            n-ary, flattened
    def parse_and(self):
        parts = [self.parse_until()]
        while self.peek()[0] == "AND":
            self.advance()
            parts.append(self.parse_until())
        return make_and(parts) if len(parts) > 1 else parts[0]

    # until := unary ('U' until)?          right associative
    def parse_until(self):
        left = self.parse_unary()
        tok = self.peek()
        if tok[0] == "WORD" and tok[1] == "U":
            self.advance()
            return Until(left, self.parse_until())
        return left

    def parse_unary(self):
        tok = self.peek()
        if tok[0] == "NOT":
            self.advance()
            return Not(self.parse_unary())
        if tok[0] == "BOX":
            self.advance()
            return Always(self.parse_unary())
        if tok[0] == "DIAMOND":
            self.advance()
            return Eventually(self.parse_unary())
        if tok[0] == "WORD" and tok[1] in ("G", "F", "X"):
            self.advance()
            ctor = {"G": Always, "F": Eventually, "X": Next}[tok[1]]
            return ctor(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.advance()
        if tok[0] == "LPAR":
            inner = self.parse_implies()
            self.expect("RPAR", "')'")
            return inner
        if tok[0] == "WORD":
            if tok[1] == "true":
                return TrueConst()
            if tok[1] == "false":
                return FalseConst()
            if tok[1] == "U":
                raise LtlSyntaxError("'U' is a binary operator", tok[2])
            return Atom(tok[1])
        raise LtlSyntaxError(
            f"expected formula, found {tok[1] or 'end of input'!r}", tok[2]
        )


def parse_ltl(text: str) -> Formula:
    """Parse concrete LTL syntax into a formula tree.

    Raises LtlSyntaxError (with a byte offset) on malformed input.
    """
    parser = _Parser(_tokenize(text))
    node = parser.parse_implies()
    tok = parser.peek()
    if tok[0] != "EOF":
        raise LtlSyntaxError(f"unexpected {tok[1]!r} after formula", tok[2])
    return node


# --- formatting ------------------------------------------------------------

# Binding strength used both for printing and (implicitly) by the parser:
# Implies=0 < Or=1 < And=2 < Until=3 < unary=4 < atoms=5.

def _fmt(f, min_prec):
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, TrueConst):
        return "true"
    if isinstance(f, FalseConst):
        return "false"
    if isinstance(f, Not):
        return "!" + _fmt(f.child, 4)
    if isinstance(f, Next):
        return "X " + _fmt(f.child, 4)
    if isinstance(f, Eventually):
        return "F " + _fmt(f.child, 4)
    if isinstance(f, Always):
        return "G " + _fmt(f.child, 4)
    if isinstance(f, Until):
        s, prec = _fmt(f.left, 4) + " U " + _fmt(f.right, 3), 3
    elif isinstance(f, And):
        s, prec = " & ".join(_fmt(c, 3) for c in f.children), 2
    elif isinstance(f, Or):
        s, prec = _fmt(f.left, 1) + " | " + _fmt(f.right, 2), 1
    elif isinstance(f, Implies):
        s, prec = _fmt(f.left, 1) + " -> " + _fmt(f.right, 0), 0
    else:
        raise TypeError(f"not a formula: {f!r}")
    return f"({s})" if prec < min_prec else s


def format_ltl(f: Formula) -> str:
    """Render a formula so that ``parse_ltl(format_ltl(f))`` is structurally `f`."""
    return _fmt(f, 0)


# --- queries ---------------------------------------------------------------

def atoms(f: Formula) -> tuple[str, ...]:
    """All atom names occurring in `f`, in lexicographic order."""
    found = set()

    def walk(node):
        if isinstance(node, Atom):
            found.add(node.name)
        elif isinstance(node, (Not, Next, Eventually, Always)):
            walk(node.child)
        elif isinstance(node, And):
            for c in node.children:
                walk(c)
        elif isinstance(node, (Or, Implies, Until)):
            walk(node.left)
            walk(node.right)

    walk(f)
    return tuple(sorted(found))


def is_propositional(f: Formula) -> bool:
    """True iff `f` contains no temporal operator."""
    if isinstance(f, (Atom, TrueConst, FalseConst)):
        return True
    if isinstance(f, Not):
        return is_propositional(f.child)
    if isinstance(f, And):
        return all(is_propositional(c) for c in f.children)
    if isinstance(f, (Or, Implies)):
        return is_propositional(f.left) and is_propositional(f.right)
    return False


def next_depth(f: Formula):
    """Max nesting depth of X in a propositional-plus-X formula, else None."""
    if isinstance(f, (Atom, TrueConst, FalseConst)):
        return 0
    if isinstance(f, Next):
        d = next_depth(f.child)
        return None if d is None else d + 1
    if isinstance(f, Not):
        return next_depth(f.child)
    if isinstance(f, And):
        depths = [next_depth(c) for c in f.children]
        return None if None in depths else max(depths)
    if isinstance(f, (Or, Implies)):
        dl, dr = next_depth(f.left), next_depth(f.right)
        return None if dl is None or dr is None else max(dl, dr)
    return None


# --- fragment detection ----------------------------------------------------

MAX_SAFETY_NEXT_DEPTH = 3


@dataclass(frozen=True)
class FragmentSpec:
    """A formula decomposed as  AND of GF p  /\\  AND of FG p  /\\  G safe.

    `recurrence` holds the propositional goals p of the GF conjuncts,
    `stability` those of the FG conjuncts, and `safety` is a single
    propositional formula with X-nesting at most MAX_SAFETY_NEXT_DEPTH
    (or None).  Source order of conjuncts is preserved.
    """

    recurrence: tuple[Formula, ...] = ()
    stability: tuple[Formula, ...] = ()
    safety: Formula | None = None

    def is_empty(self):
        return not self.recurrence and not self.stability and self.safety is None

    def to_formula(self) -> Formula:
        """Reconstruct the conjunction this spec was extracted from."""
        parts = [Always(Eventually(p)) for p in self.recurrence]
        parts += [Eventually(Always(p)) for p in self.stability]
        if self.safety is not None:
            parts.append(Always(self.safety))
        return make_and(parts)


def to_fragment(f: Formula) -> FragmentSpec | None:
    """Classify `f` into the directly translatable fragment.

    Succeeds iff, after flattening top-level conjunction, every conjunct is
    GF p (p propositional), FG p (p propositional), or G safe with safe
    propositional-over-X of depth <= 3.  Multiple G conjuncts are merged
    into one safety formula.  Returns None when `f` is not in the fragment;
    callers then fall back to HOA import.
    """
    conjuncts = f.children if isinstance(f, And) else (f,)
    recurrence, stability, safety_parts = [], [], []
    for c in conjuncts:
        if isinstance(c, Always) and isinstance(c.child, Eventually) \
                and is_propositional(c.child.child):
            recurrence.append(c.child.child)
        elif isinstance(c, Eventually) and isinstance(c.child, Always) \
                and is_propositional(c.child.child):
            stability.append(c.child.child)
        elif isinstance(c, Always):
            d = next_depth(c.child)
            if d is None or d > MAX_SAFETY_NEXT_DEPTH:
                return None
            safety_parts.append(c.child)
        else:
            return None
    safety = make_and(safety_parts) if safety_parts else None
    return FragmentSpec(tuple(recurrence), tuple(stability), safety)
