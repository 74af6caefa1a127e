"""Rabin-weighted product of a labeled MDP and a DRA.

Product state (s, q) has flat index q * n_mdp + s.  A transition under
action a goes to (s', q') with the MDP's probability exactly when
q' = delta(q, L(s)) -- the automaton reads the label of the *source* MDP
state.  Acceptance pairs are lifted as index sets, and each pair induces a
state reward vector: positive on the lifted inf set, negative on the lifted
fin set, zero elsewhere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dra import Dra, align_dra
from .errors import AtomMismatchError
from .mdp import LabeledMdp

__all__ = ["ProductMdp", "RewardScheme", "build_product", "reward_vector",
           "equivalence_class"]


@dataclass(frozen=True)
class RewardScheme:
    """Reward parameters for one acceptance pair (1-based `pair_index`)."""

    pair_index: int
    wg: float   # reward on lifted inf states, > 0
    wb: float   # reward on lifted fin states, < 0

    def __post_init__(self):
        if self.pair_index < 1:
            raise ValueError("pair_index is 1-based")
        if not self.wg > 0:
            raise ValueError("wg must be positive")
        if not self.wb < 0:
            raise ValueError("wb must be negative")


class ProductMdp:
    """Materialized product; immutable after construction."""

    def __init__(self, mdp: LabeledMdp, dra: Dra):
        self.mdp = mdp
        self.dra = dra
        self.n_mdp = mdp.n_states
        self.n_dra = dra.n_states
        self.n_states = self.n_mdp * self.n_dra
        self.n_actions = mdp.n_actions
        self.initial = dra.initial * self.n_mdp + mdp.initial

        masks = mdp.label_masks()
        # q' for every (q, s): successor DRA state after reading L(s)
        self.dra_next = dra.delta[:, masks].astype(np.int32)

        # lifted acceptance pairs as boolean masks over product states
        n_pairs = len(dra.pairs)
        self.inf_masks = np.zeros((n_pairs, self.n_states), dtype=bool)
        self.fin_masks = np.zeros((n_pairs, self.n_states), dtype=bool)
        for i, pair in enumerate(dra.pairs):
            for q in pair.inf_states:
                self.inf_masks[i, q * self.n_mdp:(q + 1) * self.n_mdp] = True
            for q in pair.fin_states:
                self.fin_masks[i, q * self.n_mdp:(q + 1) * self.n_mdp] = True

        self._action_csr = [self._build_action_matrix(a) for a in range(self.n_actions)]

        self.enabled_mask = np.zeros((self.n_actions, self.n_mdp), dtype=bool)
        for s in range(self.n_mdp):
            for a in mdp.enabled[s]:
                self.enabled_mask[a, s] = True
        self.enabled_mask = np.tile(self.enabled_mask, (1, self.n_dra))

    @property
    def n_pairs(self) -> int:
        return len(self.dra.pairs)

    def _build_action_matrix(self, a: int) -> sp.csr_matrix:
        n_mdp, n_dra = self.n_mdp, self.n_dra
        lens = np.zeros(n_mdp, dtype=np.int64)
        idx_parts, dat_parts = [], []
        for s in range(n_mdp):
            row = self.mdp.transitions.get((s, a))
            if row:
                lens[s] = len(row)
                idx_parts.append(np.fromiter((t for t, _ in row), dtype=np.int64))
                dat_parts.append(np.fromiter((p for _, p in row), dtype=np.float64))
        base_idx = np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=np.int64)
        base_dat = np.concatenate(dat_parts) if dat_parts else np.empty(0, dtype=np.float64)

        # product row (s, q) reuses MDP row s with columns shifted into block q'
        row_lens = np.tile(lens, n_dra)
        col_shift = (self.dra_next.reshape(-1).astype(np.int64)) * n_mdp
        indices = np.tile(base_idx, n_dra) + np.repeat(col_shift, row_lens)
        data = np.tile(base_dat, n_dra)
        indptr = np.concatenate(([0], np.cumsum(row_lens)))
        return sp.csr_matrix((data, indices, indptr),
                             shape=(self.n_states, self.n_states))

    def action_matrix(self, a: int) -> sp.csr_matrix:
        return self._action_csr[a]

    def components(self, p: int) -> tuple[int, int]:
        """(mdp state, dra state) of a flat product index."""
        return p % self.n_mdp, p // self.n_mdp

    def index(self, s: int, q: int) -> int:
        return q * self.n_mdp + s

    def enabled(self, p: int) -> tuple[int, ...]:
        return self.mdp.enabled[p % self.n_mdp]

    def successors(self, p: int, a: int):
        """Sparse successor list [(product state, prob), ...] of (p, a)."""
        s, q = self.components(p)
        q_next = int(self.dra_next[q, s])
        base = q_next * self.n_mdp
        return [(base + t, prob) for t, prob in self.mdp.transitions[(s, a)]]


def build_product(mdp: LabeledMdp, dra: Dra) -> ProductMdp:
    """Construct the product, aligning the automaton to the MDP's atoms."""
    extra = set(dra.atom_order) - set(mdp.atoms)
    if extra:
        raise AtomMismatchError(
            f"automaton atoms {sorted(extra)} do not appear in the model"
        )
    if dra.atom_order != tuple(mdp.atoms):
        dra = align_dra(dra, tuple(mdp.atoms))
    return ProductMdp(mdp, dra)


def reward_vector(product: ProductMdp, scheme: RewardScheme) -> np.ndarray:
    """State rewards for one pair: wg on inf states, wb on fin states, else 0.

    If a state is in both sets (legal, if odd), the negative reward wins.
    """
    i = scheme.pair_index - 1
    if not (0 <= i < product.n_pairs):
        raise ValueError(
            f"pair index {scheme.pair_index} out of range (1..{product.n_pairs})"
        )
    w = np.zeros(product.n_states, dtype=np.float64)
    inf_m, fin_m = product.inf_masks[i], product.fin_masks[i]
    w[inf_m] = scheme.wg
    if np.any(inf_m & fin_m):
        warnings.warn("pair has overlapping inf/fin states; negative reward wins")
    w[fin_m] = scheme.wb
    return w


def equivalence_class(product: ProductMdp, p: int) -> int:
    """All product states sharing an MDP component form one class."""
    return p % product.n_mdp
