"""Generators for the two demo environments.

The grid world is a width x height board with four diagonal-preference
actions; each action moves along one of its two axes with probability
`p_move` each, stays put with `p_stay`, and when a wall blocks one axis the
other axis gets `p_wall`.  Cells may carry region labels.

The traffic network has two signalized intersections: east-west links 1 and
2 in series, north-south links 3 and 4, one entry per intersection.  Queue
lengths are continuous; the discrete state is the subinterval tuple of the
four queues plus the last applied signal action, and transition
probabilities are estimated by Monte Carlo from the saturated-forwarding
dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .mdp import LabeledMdp

__all__ = [
    "GridConfig", "TrafficConfig", "build_grid_world", "build_traffic_network",
    "CyclicController", "naive_traffic_policy", "traffic_state_meta",
    "approximate_traffic_config",
    "GRID_ACTIONS", "TRAFFIC_ACTIONS", "GRID_DEMO_FORMULA", "TRAFFIC_DEMO_FORMULA",
]

GRID_ACTIONS = ("UR", "UL", "DR", "DL")
_ACTION_DIRS = {"UR": (1, 1), "UL": (-1, 1), "DR": (1, -1), "DL": (-1, -1)}

GRID_DEMO_FORMULA = "G F A & G F B & G !C"
TRAFFIC_DEMO_FORMULA = (
    "F G (x1le30 & x2le30) & G F x3le10 & G F x4le10 "
    "& G ((sv2 & X !sv2) -> (X X !sv2 & X X X !sv2))"
)


@dataclass(frozen=True)
class GridConfig:
    """Default layout: regions A at (4,4), B at (4,0), obstacle C at (2,2),
    start at (0,3); coordinates are (col, row) with row 0 at the bottom."""

    width: int = 5
    height: int = 5
    regions: dict = field(default_factory=lambda: {(4, 4): "A", (4, 0): "B", (2, 2): "C"})
    initial: tuple[int, int] = (0, 3)
    p_move: float = 0.4
    p_stay: float = 0.2
    p_wall: float = 0.8

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if abs(2 * self.p_move + self.p_stay - 1.0) > 1e-12:
            raise ValueError("2 * p_move + p_stay must equal 1")
        if abs(self.p_wall + self.p_stay - 1.0) > 1e-12:
            raise ValueError("p_wall + p_stay must equal 1")
        if not self._in_bounds(self.initial):
            raise ValueError("initial cell out of bounds")
        for cell in self.regions:
            if not self._in_bounds(cell):
                raise ValueError(f"region cell {cell} out of bounds")

    def _in_bounds(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height


def build_grid_world(config: GridConfig = GridConfig()) -> LabeledMdp:
    config.validate()
    w, h = config.width, config.height

    def idx(x, y):
        return y * w + x

    labels = [frozenset() for _ in range(w * h)]
    for (x, y), name in config.regions.items():
        labels[idx(x, y)] = labels[idx(x, y)] | {name}
    atoms = tuple(sorted({name for name in config.regions.values()}))

    transitions = {}
    for y in range(h):
        for x in range(w):
            s = idx(x, y)
            for a, name in enumerate(GRID_ACTIONS):
                dx, dy = _ACTION_DIRS[name]
                hx, hy = x + dx, y        # horizontal target
                vx, vy = x, y + dy        # vertical target
                h_ok = 0 <= hx < w
                v_ok = 0 <= vy < h
                row = {}
                if h_ok and v_ok:
                    row[idx(hx, hy)] = config.p_move
                    row[idx(vx, vy)] = config.p_move
                    row[s] = config.p_stay
                elif h_ok:            # wall on the vertical axis
                    row[idx(hx, hy)] = config.p_wall
                    row[s] = config.p_stay
                elif v_ok:            # wall on the horizontal axis
                    row[idx(vx, vy)] = config.p_wall
                    row[s] = config.p_stay
                else:                 # corner in the preferred direction
                    row[s] = 1.0
                transitions[(s, a)] = tuple(sorted(row.items()))

    return LabeledMdp(
        atoms=atoms,
        actions=GRID_ACTIONS,
        labels=tuple(labels),
        enabled=tuple(tuple(range(len(GRID_ACTIONS))) for _ in range(w * h)),
        transitions=transitions,
        initial=idx(*config.initial),
    )


# --- traffic network ---------------------------------------------------------

# action (i, j): signal 1 actuates link i, signal 2 actuates link j
TRAFFIC_ACTIONS = ("12", "14", "32", "34")
_ACTUATED = {"12": (0, 1), "14": (0, 3), "32": (2, 1), "34": (2, 3)}
_LINK2 = 1  # index of the only link with modeled downstream space


@dataclass(frozen=True)
class TrafficConfig:
    """Queue network parameters; capacities and thresholds are in vehicles.

    The structural constants are the capacities, the subinterval counts
    (4, 5, 2, 2) and the label thresholds.  Saturation limits, turn ratios
    and arrival rates are calibration choices, picked so that the naive
    synchronous controller congests links 1 and 2 while a queue-aware
    controller can hold the thresholds.
    """

    capacities: tuple = (40.0, 50.0, 30.0, 30.0)
    boundaries: tuple = (
        (0.0, 10.0, 20.0, 30.0, 40.0),
        (0.0, 10.0, 20.0, 30.0, 40.0, 50.0),
        (0.0, 10.0, 30.0),
        (0.0, 10.0, 30.0),
    )
    saturation: tuple = (15.0, 15.0, 10.0, 10.0)
    # fraction of each source link's outflow that enters link 2; the rest
    # leaves the network (link 3's outflow exits entirely by default)
    turn_into_2: dict = field(default_factory=lambda: {0: 0.5})
    arrival_means: tuple = (7.0, 0.0, 4.0, 4.0)
    thresholds: tuple = (30.0, 30.0, 10.0, 10.0)
    mc_samples: int = 20000
    prune_below: float = 1e-3
    initial_subintervals: tuple = (0, 0, 0, 0)
    initial_action: str = "34"

    def validate(self):
        if self.mc_samples < 1:
            raise ValueError("need at least one Monte-Carlo sample")
        for l in range(4):
            b = self.boundaries[l]
            if b[0] != 0.0 or abs(b[-1] - self.capacities[l]) > 1e-9:
                raise ValueError(f"link {l + 1} boundaries must span [0, capacity]")
            if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
                raise ValueError(f"link {l + 1} boundaries must increase strictly")
            if self.saturation[l] <= 0:
                raise ValueError("saturation limits must be positive")
            if not any(abs(x - self.thresholds[l]) < 1e-9 for x in b):
                raise ValueError(
                    f"label threshold {self.thresholds[l]} of link {l + 1} does not "
                    "align with a subinterval boundary"
                )
        for src, ratio in self.turn_into_2.items():
            if src not in (0, 2):
                raise ValueError("only links 1 and 3 feed link 2")
            if not (0.0 <= ratio <= 1.0):
                raise ValueError("turn ratios must lie in [0, 1]")
        if self.initial_action not in TRAFFIC_ACTIONS:
            raise ValueError(f"unknown initial action {self.initial_action!r}")

    @property
    def subinterval_counts(self):
        return tuple(len(b) - 1 for b in self.boundaries)


def _encode(config, iv, a):
    counts = config.subinterval_counts
    s = 0
    for l in range(4):
        s = s * counts[l] + iv[l]
    return s * len(TRAFFIC_ACTIONS) + a


def _decode(config, s):
    counts = config.subinterval_counts
    a = s % len(TRAFFIC_ACTIONS)
    s //= len(TRAFFIC_ACTIONS)
    iv = [0] * 4
    for l in range(3, -1, -1):
        iv[l] = s % counts[l]
        s //= counts[l]
    return tuple(iv), a


def _step_queues(config: TrafficConfig, q, action_name, arrivals):
    """One 15-second step of the saturated-forwarding dynamics (vectorized).

    q: (n, 4) queue lengths.  Outflow of an actuated link is capped by its
    saturation limit; the share turning into link 2 is additionally capped
    by link 2's free space, and any blocked vehicles stay in their queue.
    Arrivals beyond capacity are turned away at the network boundary.
    """
    actuated = _ACTUATED[action_name]
    caps = np.asarray(config.capacities)
    out = np.zeros_like(q)
    for l in actuated:
        out[:, l] = np.minimum(q[:, l], config.saturation[l])

    inflow2 = np.zeros(len(q))
    blocked = np.zeros_like(q)
    space2 = caps[_LINK2] - q[:, _LINK2]
    for src, ratio in sorted(config.turn_into_2.items()):
        if src not in actuated:
            continue
        want = ratio * out[:, src]
        granted = np.minimum(want, np.maximum(space2 - inflow2, 0.0))
        inflow2 += granted
        blocked[:, src] = want - granted

    q_next = q - out + blocked + arrivals
    q_next[:, _LINK2] += inflow2
    return np.clip(q_next, 0.0, caps)


def _traffic_labels(config: TrafficConfig):
    """Per-state label sets; atoms are the threshold propositions plus sv2."""
    counts = config.subinterval_counts
    atom_names = []
    for l in range(4):
        atom_names.append(f"x{l + 1}le{int(config.thresholds[l])}")
    atoms = tuple(sorted(atom_names + ["sv2"]))
    n_states = int(np.prod(counts)) * len(TRAFFIC_ACTIONS)
    labels = []
    for s in range(n_states):
        iv, a = _decode(config, s)
        labs = set()
        for l in range(4):
            if config.boundaries[l][iv[l] + 1] <= config.thresholds[l] + 1e-9:
                labs.add(atom_names[l])
        if _LINK2 in _ACTUATED[TRAFFIC_ACTIONS[a]]:
            labs.add("sv2")
        labels.append(frozenset(labs))
    return atoms, tuple(labels)


def build_traffic_network(config: TrafficConfig = TrafficConfig(),
                          seed: int = 0) -> LabeledMdp:
    """Estimate the discrete MDP by Monte Carlo, one (state, action) at a time.

    Each pair gets an independently derived RNG stream, so the table is
    deterministic for a fixed seed no matter how the work is partitioned.
    """
    config.validate()
    counts = config.subinterval_counts
    n_states = int(np.prod(counts)) * len(TRAFFIC_ACTIONS)
    atoms, labels = _traffic_labels(config)
    bounds = [np.asarray(b) for b in config.boundaries]
    means = np.asarray(config.arrival_means)

    transitions = {}
    n = config.mc_samples
    for s in range(n_states):
        iv, _ = _decode(config, s)
        lo = np.array([bounds[l][iv[l]] for l in range(4)])
        hi = np.array([bounds[l][iv[l] + 1] for l in range(4)])
        for a, name in enumerate(TRAFFIC_ACTIONS):
            rng = np.random.default_rng(np.random.SeedSequence([seed, s, a]))
            q = rng.uniform(lo, hi, size=(n, 4))
            arrivals = rng.poisson(means, size=(n, 4)).astype(np.float64)
            q_next = _step_queues(config, q, name, arrivals)
            iv_next = np.stack(
                [np.searchsorted(bounds[l][1:-1], q_next[:, l], side="left")
                 for l in range(4)],
                axis=1,
            )
            flat = iv_next[:, 0]
            for l in range(1, 4):
                flat = flat * counts[l] + iv_next[:, l]
            flat = flat * len(TRAFFIC_ACTIONS) + a
            succ, cnt = np.unique(flat, return_counts=True)
            probs = cnt / cnt.sum()
            keep = probs >= config.prune_below
            if not np.any(keep):
                keep = probs == probs.max()
            succ, probs = succ[keep], probs[keep]
            probs = probs / probs.sum()
            transitions[(s, a)] = tuple(
                (int(t), float(p)) for t, p in zip(succ, probs)
            )

    return LabeledMdp(
        atoms=atoms,
        actions=TRAFFIC_ACTIONS,
        labels=labels,
        enabled=tuple(tuple(range(len(TRAFFIC_ACTIONS))) for _ in range(n_states)),
        transitions=transitions,
        initial=_encode(config, config.initial_subintervals,
                        TRAFFIC_ACTIONS.index(config.initial_action)),
    )


def traffic_state_meta(config: TrafficConfig = TrafficConfig()) -> dict:
    """Representative (midpoint) queue lengths and signal bits per state."""
    counts = config.subinterval_counts
    n_states = int(np.prod(counts)) * len(TRAFFIC_ACTIONS)
    states = []
    for s in range(n_states):
        iv, a = _decode(config, s)
        mids = [
            (config.boundaries[l][iv[l]] + config.boundaries[l][iv[l] + 1]) / 2.0
            for l in range(4)
        ]
        name = TRAFFIC_ACTIONS[a]
        states.append({
            "queues": mids,
            "sv1": int(0 in _ACTUATED[name]),
            "sv2": int(_LINK2 in _ACTUATED[name]),
            "last_action": name,
        })
    return {"states": states}


class CyclicController:
    """Fixed periodic action sequence; phase survives Rabin resets."""

    def __init__(self, action_indices):
        self.cycle = tuple(action_indices)

    def action_index(self, product_state, step):
        return self.cycle[step % len(self.cycle)]


def naive_traffic_policy() -> CyclicController:
    """Synchronous baseline: links (1,2) for 3 steps, then (3,4) for 3 steps."""
    a12 = TRAFFIC_ACTIONS.index("12")
    a34 = TRAFFIC_ACTIONS.index("34")
    return CyclicController([a12, a12, a12, a34, a34, a34])


def approximate_traffic_config(base: TrafficConfig = TrafficConfig()) -> TrafficConfig:
    """A historical-data-style misestimate of the true dynamics.

    Overstates how much link-1 traffic turns into link 2 and misjudges the
    saturation limits; used to demonstrate warm-starting from an
    approximate model followed by online refinement.
    """
    return replace(base, turn_into_2={0: 0.8},
                   saturation=(15.0, 11.0, 12.0, 12.0))
