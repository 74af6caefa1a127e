import numpy as np
import pytest

from oracles import random_dra, random_mdp
from rabin_synth.dra import Dra, RabinPair
from rabin_synth.errors import AtomMismatchError
from rabin_synth.product import (RewardScheme, build_product, equivalence_class,
                                 reward_vector)


def _universal_dra(atom_order):
    n_letters = 1 << len(atom_order)
    return Dra(atom_order, 1, 0, np.zeros((1, n_letters), dtype=np.int32),
               (RabinPair(frozenset({0}), frozenset()),))


class TestBuildProduct:
    def test_grid_size_identity(self, grid_model, grid_dra, grid_product):
        assert grid_product.n_states == grid_model.n_states * grid_dra.n_states

    def test_universal_lift_is_isomorphic(self, rng):
        m = random_mdp(rng, 5, 2, 2)
        p = build_product(m, _universal_dra(m.atoms))
        assert p.n_states == m.n_states
        for s in range(m.n_states):
            for a in m.enabled[s]:
                assert p.successors(s, a) == list(m.transitions[(s, a)])

    def test_atom_mismatch(self, rng):
        m = random_mdp(rng, 3, 2, 1)   # atoms ('a',)
        d = _universal_dra(("a", "zzz"))
        with pytest.raises(AtomMismatchError):
            build_product(m, d)

    def test_alignment_of_smaller_automaton(self, grid_model):
        # DRA over ('A',) only; must align into the model's ('A','B','C')
        d = _universal_dra(("A",))
        p = build_product(grid_model, d)
        assert p.n_states == grid_model.n_states

    def test_structure_matches_definition(self, rng):
        for _ in range(25):
            m = random_mdp(rng, int(rng.integers(2, 7)), 2, 2)
            d = random_dra(rng, int(rng.integers(1, 5)), 2)
            p = build_product(m, d)
            masks = m.label_masks()
            for s in range(m.n_states):
                for q in range(d.n_states):
                    sp = p.index(s, q)
                    q_next = int(d.delta[q, masks[s]])
                    for a in m.enabled[s]:
                        got = dict(p.successors(sp, a))
                        want = {
                            p.index(t, q_next): prob
                            for t, prob in m.transitions[(s, a)]
                        }
                        assert got == want
                        assert abs(sum(got.values()) - 1.0) < 1e-9

    def test_action_matrices_row_stochastic(self, grid_product):
        for a in range(grid_product.n_actions):
            sums = np.asarray(grid_product.action_matrix(a).sum(axis=1)).ravel()
            assert np.allclose(sums, 1.0, atol=1e-12)


class TestRewardVector:
    def test_grid_values(self, grid_product):
        w = reward_vector(grid_product, RewardScheme(1, 500.0, -500.0))
        assert set(np.unique(w)) == {-500.0, 0.0, 500.0}
        n_mdp = grid_product.n_mdp
        (pair,) = grid_product.dra.pairs
        assert np.sum(w == 500.0) == n_mdp * len(pair.inf_states)
        assert np.sum(w == -500.0) == n_mdp * len(pair.fin_states)

    def test_normalized_scheme(self, grid_product):
        w = reward_vector(grid_product, RewardScheme(1, 1.0, -1.0))
        assert w.max() == 1.0

    def test_empty_fin_set_has_no_negatives(self, rng):
        m = random_mdp(rng, 3, 2, 1)
        d = Dra(m.atoms, 2, 0, np.zeros((2, 2), dtype=np.int32),
                (RabinPair(frozenset({1}), frozenset()),))
        w = reward_vector(build_product(m, d), RewardScheme(1, 2.0, -3.0))
        assert (w >= 0).all()

    def test_overlap_prefers_penalty(self, rng):
        m = random_mdp(rng, 2, 2, 1)
        with pytest.warns(UserWarning):
            d = Dra(m.atoms, 1, 0, np.zeros((1, 2), dtype=np.int32),
                    (RabinPair(frozenset({0}), frozenset({0})),))
        with pytest.warns(UserWarning, match="negative"):
            w = reward_vector(build_product(m, d), RewardScheme(1, 1.0, -9.0))
        assert (w == -9.0).all()

    def test_pair_index_bounds(self, grid_product):
        with pytest.raises(ValueError):
            reward_vector(grid_product, RewardScheme(2, 1.0, -1.0))
        with pytest.raises(ValueError):
            RewardScheme(0, 1.0, -1.0)
        with pytest.raises(ValueError):
            RewardScheme(1, -1.0, -1.0)
        with pytest.raises(ValueError):
            RewardScheme(1, 1.0, 1.0)


class TestEquivalenceClasses:
    def test_same_mdp_component_shares_class(self, grid_product):
        n = grid_product.n_mdp
        assert equivalence_class(grid_product, grid_product.index(3, 0)) == 3
        assert equivalence_class(grid_product, grid_product.index(3, 2)) == 3
        assert equivalence_class(grid_product, grid_product.index(4, 1)) == 4

    def test_class_count(self, grid_product):
        classes = {equivalence_class(grid_product, sp)
                   for sp in range(grid_product.n_states)}
        assert classes == set(range(grid_product.n_mdp))


class TestRunProjection:
    def test_projections_are_runs(self, grid_product, grid_scheme, rng):
        from rabin_synth.verify import simulate
        from rabin_synth.mdp import StationaryPolicy
        pol = StationaryPolicy(tuple(grid_product.enabled(p)[0]
                                     for p in range(grid_product.n_states)))
        trace = simulate(grid_product, pol, 300, seed=5, scheme=grid_scheme)
        m, d = grid_product.mdp, grid_product.dra
        masks = m.label_masks()
        for t in range(300):
            s, q = int(trace.mdp_states[t]), int(trace.dra_states[t])
            s2, q2 = int(trace.mdp_states[t + 1]), int(trace.dra_states[t + 1])
            a = m.actions.index(trace.actions[t])
            assert dict(m.transitions[(s, a)]).get(s2, 0.0) > 0.0
            assert q2 == int(d.delta[q, masks[s]])
