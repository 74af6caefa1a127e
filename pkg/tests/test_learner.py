import numpy as np
import pytest

import rabin_synth as rs
from rabin_synth.learner import (HAVE_COMPILED_KERNEL, ExplorationStrategy,
                                 LearnerState, explore_action, reset_condition,
                                 reset_rabin_state, run_trials, td_step)
from rabin_synth.mdp import StationaryPolicy


@pytest.fixture()
def grid_learner(grid_product, grid_scheme):
    def make(strategy="uniform", **kwargs):
        strat = (ExplorationStrategy.parse(strategy)
                 if isinstance(strategy, str) else strategy)
        return LearnerState(grid_product, grid_scheme, gamma=0.98, alpha=0.9,
                            strategy=strat, reset_interval=200, **kwargs)
    return make


class TestStrategyParsing:
    def test_forms(self):
        assert ExplorationStrategy.parse("uniform").kind == "uniform"
        e = ExplorationStrategy.parse("eps:0.3:0.99:0.01")
        assert (e.kind, e.epsilon, e.epsilon_decay, e.epsilon_min) == \
            ("epsilon", 0.3, 0.99, 0.01)
        o = ExplorationStrategy.parse("opt:5")
        assert (o.kind, o.visit_threshold) == ("optimistic", 5)

    def test_bad_forms(self):
        for text in ("nope", "eps", "opt", "eps:0.1:0.9:0.0:extra"):
            with pytest.raises(ValueError):
                ExplorationStrategy.parse(text)


class TestTdStep:
    def test_first_visit_initializes_to_reward(self, grid_product, grid_learner):
        ls = grid_learner()
        accepting = int(np.nonzero(ls.w == 500.0)[0][0])
        rng = np.random.default_rng(0)
        td_step(ls, grid_product, accepting, rng)
        assert ls.visited[accepting]
        assert ls.utilities[accepting] == 500.0

    def test_counts_after_one_observation(self, grid_product, grid_learner):
        ls = grid_learner()
        rng = np.random.default_rng(0)
        a0 = td_step(ls, grid_product, grid_product.initial, rng)
        succ = grid_product.successors(grid_product.initial, a0)[0][0]
        td_step(ls, grid_product, succ, rng)
        cls = grid_product.initial % grid_product.n_mdp
        assert ls.counts_sa[cls, a0] == 1
        assert ls.transition_estimate(cls, a0) == {succ % grid_product.n_mdp: 1.0}

    def test_update_rule_arithmetic(self, grid_product):
        # alpha=0.5, U(s)=0, W(s)=0, gamma=0.9, best lookahead 10 -> 4.5
        ls = LearnerState(grid_product, rs.RewardScheme(1, 500.0, -500.0),
                          gamma=0.9, alpha=0.5,
                          strategy=ExplorationStrategy("uniform"))
        prev = grid_product.initial           # a neutral state: W = 0
        assert ls.w[prev] == 0.0
        cls = prev % grid_product.n_mdp
        q_next = int(ls.dra_next_flat[(prev // grid_product.n_mdp)
                                      * grid_product.n_mdp + cls])
        # after the step's own increment, action 0 has estimate 1.0 of
        # reaching class 0, whose expansion (0, q_next) is worth 10
        target = grid_product.index(0, q_next)
        ls.counts_sa[cls, 0] = 999
        ls.counts_succ[cls, 0, 0] = 999
        ls.utilities[target] = 10.0
        ls.visited[target] = 1
        ls.visited[prev] = 1
        ls.istate[0] = prev
        ls.istate[1] = 0
        current = grid_product.index(0, grid_product.dra.initial)
        td_step(ls, grid_product, current, np.random.default_rng(0))
        assert ls.utilities[prev] == pytest.approx(4.5, abs=1e-12)

    def test_returns_enabled_action_and_stores_prev(self, grid_product, grid_learner):
        ls = grid_learner()
        rng = np.random.default_rng(3)
        a = td_step(ls, grid_product, grid_product.initial, rng)
        assert a in grid_product.enabled(grid_product.initial)
        assert ls.prev_state == grid_product.initial
        assert ls.prev_action == a


class TestResets:
    def test_reset_rabin_state(self, grid_product):
        q0 = grid_product.dra.initial
        sp = grid_product.index(7, 3)
        reset = reset_rabin_state(grid_product, sp)
        assert reset == grid_product.index(7, q0)
        assert reset_rabin_state(grid_product, reset) == reset

    def test_reset_condition_cases(self, grid_product, grid_learner):
        ls = grid_learner()
        (sink,) = grid_product.dra.pairs[0].fin_states
        in_sink = grid_product.index(0, sink)
        fresh = grid_product.index(0, grid_product.dra.initial)
        assert reset_condition(ls, grid_product, in_sink)
        assert not reset_condition(ls, grid_product, fresh)
        ls.istate[2] = 200
        assert reset_condition(ls, grid_product, fresh)
        assert reset_condition(grid_learner(), grid_product, fresh, force=True)

    def test_td_step_applies_reset(self, grid_product, grid_learner):
        ls = grid_learner()
        (sink,) = grid_product.dra.pairs[0].fin_states
        sp = grid_product.index(5, sink)
        td_step(ls, grid_product, sp, np.random.default_rng(0))
        assert ls.prev_state == grid_product.index(5, grid_product.dra.initial)

    def test_label_processing_resumes_from_q0(self, grid_product, grid_scheme):
        ls = LearnerState(grid_product, grid_scheme, gamma=0.98,
                          reset_interval=10 ** 9)
        rng = np.random.default_rng(1)
        (sink,) = grid_product.dra.pairs[0].fin_states
        n_mdp = grid_product.n_mdp
        masks = grid_product.mdp.label_masks()
        a = td_step(ls, grid_product, grid_product.index(3, sink), rng)
        s, q = 3, grid_product.dra.initial
        q_next = int(grid_product.dra.delta[q, masks[s]])
        assert q_next == int(ls.dra_next_flat[q * n_mdp + s])


class TestExploration:
    def test_uniform_spread(self, grid_product, grid_learner):
        ls = grid_learner()
        rng = np.random.default_rng(0)
        counts = np.zeros(4)
        for _ in range(4000):
            counts[explore_action(ls.strategy, ls, 0, rng)] += 1
        assert counts.min() > 800

    def test_zero_epsilon_is_greedy(self, grid_product, grid_learner):
        ls = grid_learner(ExplorationStrategy("epsilon", epsilon=0.0))
        ls.policy[0] = 2
        rng = np.random.default_rng(0)
        assert all(explore_action(ls.strategy, ls, 0, rng) == 2 for _ in range(50))

    def test_optimistic_prefers_unvisited(self, grid_product, grid_learner):
        ls = grid_learner(ExplorationStrategy("optimistic", visit_threshold=5))
        cls = 0
        ls.counts_sa[cls, 0] = 9
        ls.counts_sa[cls, 1] = 9
        ls.counts_sa[cls, 2] = 9
        # action 3 under-visited -> optimistic value dominates the zero estimates
        rng = np.random.default_rng(0)
        assert explore_action(ls.strategy, ls, 0, rng) == 3


class TestRunTrials:
    def test_zero_trials_unchanged(self, grid_product, grid_learner):
        ls = grid_learner()
        before_u = ls.utilities.copy()
        ls2, log = run_trials(grid_product, ls, 0, 100, seed=1)
        assert ls2 is ls
        assert np.array_equal(ls.utilities, before_u)
        assert len(log.trials) == 0

    def test_determinism(self, grid_product, grid_learner):
        a = grid_learner()
        b = grid_learner()
        run_trials(grid_product, a, 30, 50, seed=9)
        run_trials(grid_product, b, 30, 50, seed=9)
        assert a.equals(b)

    def test_seed_changes_outcome(self, grid_product, grid_learner):
        a = grid_learner()
        b = grid_learner()
        run_trials(grid_product, a, 30, 50, seed=9)
        run_trials(grid_product, b, 30, 50, seed=10)
        assert not a.equals(b)

    @pytest.mark.skipif(not HAVE_COMPILED_KERNEL, reason="extension not built")
    @pytest.mark.parametrize("strategy", ["uniform", "eps:0.3:0.999:0.05", "opt:3"])
    def test_backends_bit_identical(self, grid_product, grid_learner, strategy):
        a = grid_learner(strategy)
        b = grid_learner(strategy)
        _, log_a = run_trials(grid_product, a, 40, 60, seed=4, backend="cython")
        _, log_b = run_trials(grid_product, b, 40, 60, seed=4, backend="python")
        assert a.equals(b)
        assert np.array_equal(log_a.g_visits, log_b.g_visits)
        assert np.array_equal(log_a.b_visits, log_b.b_visits)
        assert np.array_equal(log_a.resets, log_b.resets)
        assert a.current_state == b.current_state

    def test_frequency_tables_consistent_after_fuzz(self, grid_product, grid_learner):
        ls = grid_learner("eps:0.4:0.9999:0.1")
        run_trials(grid_product, ls, 500, 200, seed=2)
        totals = ls.counts_succ.sum(axis=2)
        assert np.array_equal(totals, ls.counts_sa)
        rows = ls.counts_succ[ls.counts_sa > 0] / ls.counts_sa[ls.counts_sa > 0][:, None]
        assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-9)

    def test_class_sharing(self, grid_product, grid_learner):
        # estimates are keyed by MDP component only, shared across DRA states
        ls = grid_learner()
        run_trials(grid_product, ls, 20, 100, seed=5)
        est = ls.transition_estimate(3, 1)
        assert est == ls.transition_estimate(
            rs.equivalence_class(grid_product, grid_product.index(3, 2)), 1
        )

    def test_estimates_approach_truth(self, grid_product, grid_learner, grid_model):
        ls = grid_learner()
        run_trials(grid_product, ls, 600, 200, seed=0)
        worst = 0.0
        checked = 0
        for s in range(grid_model.n_states):
            for a in range(4):
                if ls.counts_sa[s, a] >= 1000:
                    checked += 1
                    truth = dict(grid_model.transitions[(s, a)])
                    est = ls.transition_estimate(s, a)
                    keys = set(truth) | set(est)
                    worst = max(worst, max(abs(truth.get(t, 0.0) - est.get(t, 0.0))
                                           for t in keys))
        assert checked > 0
        assert worst < 0.05

    def test_trial_log_csv(self, grid_product, grid_learner, tmp_path):
        ls = grid_learner()
        _, log = run_trials(grid_product, ls, 3, 10, seed=0)
        text = log.to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "trial,steps,g_visits,b_visits,resets"
        assert len(lines) == 4


class TestWarmStart:
    def test_policy_and_utilities(self, grid_product, grid_scheme):
        n = grid_product.n_states
        pol = StationaryPolicy(tuple([1] * n))
        util = np.linspace(-1.0, 1.0, n)
        ls = LearnerState(grid_product, grid_scheme, gamma=0.98,
                          policy_init=pol, utility_init=util)
        assert np.array_equal(ls.policy, np.ones(n, dtype=np.int32))
        assert np.array_equal(ls.utilities, util)
        assert ls.visited.all()

    def test_pseudo_count_marginals(self, grid_product, grid_scheme, grid_model):
        ls = LearnerState(grid_product, grid_scheme, gamma=0.98,
                          prior_model=grid_model, prior_weight=17)
        assert (ls.counts_sa == 17).all()
        assert np.array_equal(ls.counts_succ.sum(axis=2), ls.counts_sa)
        est = ls.transition_estimate(12, 0)
        truth = dict(grid_model.transitions[(12, 0)])
        for t, p in truth.items():
            assert est[t] == pytest.approx(p, abs=0.5 / 17)

    def test_size_mismatch_rejected(self, grid_product, grid_scheme):
        with pytest.raises(ValueError):
            LearnerState(grid_product, grid_scheme, gamma=0.98,
                         policy_init=StationaryPolicy((0,)))
