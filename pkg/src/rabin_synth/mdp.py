"""Labeled MDP data model, validation, and the model/policy file formats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

__all__ = [
    "LabeledMdp", "StationaryPolicy", "MdpIssue", "validate_mdp",
    "serialize_mdp", "deserialize_mdp", "policy_to_json", "policy_from_json",
]

PROB_TOL = 1e-9


@dataclass
class LabeledMdp:
    """Finite labeled MDP with per-state enabled actions and label sets.

    Transitions are sparse: `transitions[(s, a)]` lists (successor, prob)
    pairs, ascending by successor, for every enabled (state, action); a
    missing successor means probability zero.  Immutable by convention.
    """

    atoms: tuple[str, ...]
    actions: tuple[str, ...]
    labels: tuple[frozenset[str], ...]
    enabled: tuple[tuple[int, ...], ...]
    transitions: dict
    initial: int
    _label_masks: np.ndarray = field(init=False, repr=False, default=None,
                                     compare=False)

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def label_masks(self) -> np.ndarray:
        """Per-state label bitmask over the atom ordering (cached)."""
        if self._label_masks is None:
            index = {a: i for i, a in enumerate(self.atoms)}
            masks = np.zeros(self.n_states, dtype=np.int64)
            for s, labs in enumerate(self.labels):
                for name in labs:
                    masks[s] |= 1 << index[name]
            self._label_masks = masks
        return self._label_masks

    def successors(self, s: int, a: int):
        return self.transitions[(s, a)]


@dataclass(frozen=True)
class StationaryPolicy:
    """Per-state action choice (on an MDP or a product MDP)."""

    choices: tuple[int, ...]

    @property
    def n_states(self) -> int:
        return len(self.choices)

    def __getitem__(self, s: int) -> int:
        return self.choices[s]


@dataclass(frozen=True)
class MdpIssue:
    state: int | None
    action: str | None
    message: str

    def __str__(self):
        locus = "" if self.state is None else f" at state {self.state}"
        if self.action is not None:
            locus += f", action {self.action!r}"
        return self.message + locus


def validate_mdp(m: LabeledMdp) -> list[MdpIssue]:
    """Structural checks; an empty list means the MDP is well formed."""
    issues = []
    n = m.n_states
    if not (0 <= m.initial < n):
        issues.append(MdpIssue(None, None, f"initial state {m.initial} out of range"))
    if len(m.enabled) != n:
        issues.append(MdpIssue(None, None, "enabled list length != state count"))
    atom_set = set(m.atoms)
    for s in range(n):
        bad = m.labels[s] - atom_set
        if bad:
            issues.append(MdpIssue(s, None, f"labels {sorted(bad)} not in atom list"))
        if not m.enabled[s]:
            issues.append(MdpIssue(s, None, "no enabled action"))
        for a in m.enabled[s]:
            if not (0 <= a < m.n_actions):
                issues.append(MdpIssue(s, None, f"enabled action index {a} out of range"))
                continue
            row = m.transitions.get((s, a))
            name = m.actions[a]
            if row is None:
                issues.append(MdpIssue(s, name, "enabled action has no transition row"))
                continue
            total = 0.0
            for t, p in row:
                if not (0 <= t < n):
                    issues.append(MdpIssue(s, name, f"successor {t} out of range"))
                if not (0.0 <= p <= 1.0 + PROB_TOL):
                    issues.append(MdpIssue(s, name, f"probability {p} outside [0, 1]"))
                total += p
            if abs(total - 1.0) > PROB_TOL:
                issues.append(MdpIssue(s, name, f"row sums to {total!r}, not 1"))
    for (s, a) in m.transitions:
        if 0 <= s < n and a not in m.enabled[s]:
            issues.append(MdpIssue(s, m.actions[a], "transition row for disabled action"))
    return issues


# --- model file format -------------------------------------------------------
#
# {"atoms": [...], "actions": [...],
#  "states": [{"labels": [...], "enabled": [...]}, ...],
#  "initial": int,
#  "transitions": [{"from": int, "action": str, "to": int, "p": float}, ...]}

def serialize_mdp(m: LabeledMdp) -> str:
    transitions = []
    for s in range(m.n_states):
        for a in m.enabled[s]:
            for t, p in m.transitions[(s, a)]:
                transitions.append(
                    {"from": s, "action": m.actions[a], "to": t, "p": float(p)}
                )
    doc = {
        "atoms": list(m.atoms),
        "actions": list(m.actions),
        "states": [
            {"labels": sorted(m.labels[s]), "enabled": [m.actions[a] for a in m.enabled[s]]}
            for s in range(m.n_states)
        ],
        "initial": m.initial,
        "transitions": transitions,
    }
    return json.dumps(doc, indent=1)


def _need(doc, key, kind, path):
    if key not in doc:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field")
    val = doc[key]
    if not isinstance(val, kind):
        raise SchemaError(f"{path}.{key}" if path else key,
                          f"expected {kind.__name__}, got {type(val).__name__}")
    return val


def deserialize_mdp(text: str) -> LabeledMdp:
    """Parse a model file; raises SchemaError with a field path on violations."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("$", "top level must be an object")
    atoms = tuple(_need(doc, "atoms", list, ""))
    actions = tuple(_need(doc, "actions", list, ""))
    if len(set(actions)) != len(actions):
        raise SchemaError("actions", "duplicate action names")
    action_index = {a: i for i, a in enumerate(actions)}
    states = _need(doc, "states", list, "")
    initial = _need(doc, "initial", int, "")

    labels, enabled = [], []
    for i, st in enumerate(states):
        path = f"states[{i}]"
        if not isinstance(st, dict):
            raise SchemaError(path, "expected object")
        labs = _need(st, "labels", list, path)
        en = _need(st, "enabled", list, path)
        for name in en:
            if name not in action_index:
                raise SchemaError(f"{path}.enabled", f"unknown action {name!r}")
        labels.append(frozenset(labs))
        enabled.append(tuple(sorted(action_index[name] for name in en)))

    rows = {}
    for i, tr in enumerate(_need(doc, "transitions", list, "")):
        path = f"transitions[{i}]"
        if not isinstance(tr, dict):
            raise SchemaError(path, "expected object")
        s = _need(tr, "from", int, path)
        name = _need(tr, "action", str, path)
        t = _need(tr, "to", int, path)
        p = tr.get("p")
        if not isinstance(p, (int, float)) or isinstance(p, bool):
            raise SchemaError(f"{path}.p", "missing or non-numeric probability")
        if name not in action_index:
            raise SchemaError(f"{path}.action", f"unknown action {name!r}")
        if not (0 <= s < len(states)) or not (0 <= t < len(states)):
            raise SchemaError(path, "state index out of range")
        rows.setdefault((s, action_index[name]), []).append((t, float(p)))

    transitions = {
        key: tuple(sorted(row)) for key, row in rows.items()
    }
    return LabeledMdp(
        atoms=atoms,
        actions=actions,
        labels=tuple(labels),
        enabled=tuple(enabled),
        transitions=transitions,
        initial=initial,
    )


# --- policy file format ------------------------------------------------------
#
# {"choices": [action name per product state],
#  "product_meta": {"mdp_states": int, "dra_states": int},
#  "utilities": [float, ...]}            # optional

def policy_to_json(policy: StationaryPolicy, actions, mdp_states: int,
                   dra_states: int, utilities=None) -> str:
    doc = {
        "choices": [actions[a] for a in policy.choices],
        "product_meta": {"mdp_states": mdp_states, "dra_states": dra_states},
    }
    if utilities is not None:
        doc["utilities"] = [float(u) for u in utilities]
    return json.dumps(doc, indent=1)


def policy_from_json(text: str, actions):
    """Returns (StationaryPolicy, meta dict, utilities array or None)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    choices = _need(doc, "choices", list, "")
    meta = _need(doc, "product_meta", dict, "")
    _need(meta, "mdp_states", int, "product_meta")
    _need(meta, "dra_states", int, "product_meta")
    action_index = {a: i for i, a in enumerate(actions)}
    idx = []
    for i, name in enumerate(choices):
        if name not in action_index:
            raise SchemaError(f"choices[{i}]", f"unknown action {name!r}")
        idx.append(action_index[name])
    utilities = doc.get("utilities")
    if utilities is not None:
        if not isinstance(utilities, list) or len(utilities) != len(choices):
            raise SchemaError("utilities", "must list one value per product state")
        utilities = np.asarray(utilities, dtype=np.float64)
    return StationaryPolicy(tuple(idx)), meta, utilities
