"""Pure-Python TD-learning kernel.

Fallback for the compiled extension in `_tdcore`; both implement the exact
same update, in the same floating-point operation order, consuming the same
pre-drawn uniform arrays, so a run is bit-identical regardless of backend.
Keep the two files in sync.
"""

from __future__ import annotations

STRAT_UNIFORM = 0
STRAT_EPSILON = 1
STRAT_OPTIMISTIC = 2


def _lookahead(u, visited, w, n_sa, n_succ, dra_next, n_mdp, s, a, q):
    """Estimated one-step value sum_t P_hat(s,a,t) * U((t, delta(q, L(s))))."""
    tot = n_sa[s, a]
    if tot == 0:
        return 0.0
    base = int(dra_next[q * n_mdp + s]) * n_mdp
    qv = 0.0
    row = n_succ[s, a]
    for t in row.nonzero()[0]:
        tgt = base + int(t)
        uval = u[tgt] if visited[tgt] else w[tgt]
        qv += (row[t] / tot) * uval
    return qv


def core_step(
    u, visited, n_sa, n_succ, pi, istate, fstate,
    w, rej_sink, dra_next, en_off, en_act,
    n_mdp, n_actions,
    alpha, gamma, reset_interval, q0,
    strat_kind, eps_min, eps_decay, visit_threshold, optimistic_value,
    sp, u0, u1, force,
):
    """One learning update; returns (action, state after any reset, did_reset).

    Mirrors the kernel loop body in `_tdcore.pyx`.  istate holds
    (prev_state, prev_action, steps_since_reset, steps_total); fstate holds
    the current epsilon.
    """
    s = sp % n_mdp
    q = sp // n_mdp

    if not visited[sp]:
        u[sp] = w[sp]
        visited[sp] = 1

    did_reset = False
    if force or istate[2] >= reset_interval or rej_sink[q]:
        q = q0
        sp = q0 * n_mdp + s
        istate[2] = 0
        did_reset = True
    elif istate[0] >= 0:
        prev = int(istate[0])
        pa = int(istate[1])
        ps = prev % n_mdp
        pq = prev // n_mdp
        n_sa[ps, pa] += 1
        n_succ[ps, pa, s] += 1
        best = -float("inf")
        best_a = -1
        for k in range(en_off[ps], en_off[ps + 1]):
            a = int(en_act[k])
            qv = _lookahead(u, visited, w, n_sa, n_succ, dra_next, n_mdp, ps, a, pq)
            if qv > best:
                best = qv
                best_a = a
        u[prev] = alpha * u[prev] + (1.0 - alpha) * (w[prev] + gamma * best)
        pi[prev] = best_a

    # exploration: choose the next action at the (possibly reset) state
    lo, hi = int(en_off[s]), int(en_off[s + 1])
    n_en = hi - lo
    if strat_kind == STRAT_UNIFORM:
        j = int(u0 * n_en)
        if j >= n_en:
            j = n_en - 1
        action = int(en_act[lo + j])
    elif strat_kind == STRAT_EPSILON:
        eps = fstate[0]
        if u0 < eps:
            j = int(u1 * n_en)
            if j >= n_en:
                j = n_en - 1
            action = int(en_act[lo + j])
        else:
            action = int(pi[sp])
        e = eps * eps_decay
        fstate[0] = e if e > eps_min else eps_min
    else:  # STRAT_OPTIMISTIC
        best = -float("inf")
        action = -1
        for k in range(lo, hi):
            a = int(en_act[k])
            if n_sa[s, a] < visit_threshold:
                qv = optimistic_value
            else:
                qv = _lookahead(u, visited, w, n_sa, n_succ, dra_next, n_mdp, s, a, q)
            if qv > best:
                best = qv
                action = a
    istate[0] = sp
    istate[1] = action
    istate[2] += 1
    istate[3] += 1
    return action, sp, did_reset


def run_kernel(
    u, visited, n_sa, n_succ, pi, istate, fstate,
    w, rej_sink, dra_next, en_off, en_act,
    tr_off, tr_succ, tr_cum,
    g_mask, b_mask,
    env_u, exp_u,
    log_g, log_b, log_resets,
    trials, steps_per_trial,
    n_mdp, n_dra, n_actions,
    alpha, gamma, reset_interval, q0,
    strat_kind, eps_min, eps_decay, visit_threshold, optimistic_value,
    start_state,
):
    """Simulate trials * steps_per_trial environment steps, learning online."""
    cur = start_state
    for trial in range(trials):
        for step_in in range(steps_per_trial):
            t = trial * steps_per_trial + step_in
            log_g[trial] += g_mask[cur]
            log_b[trial] += b_mask[cur]
            action, sp, did_reset = core_step(
                u, visited, n_sa, n_succ, pi, istate, fstate,
                w, rej_sink, dra_next, en_off, en_act,
                n_mdp, n_actions,
                alpha, gamma, reset_interval, q0,
                strat_kind, eps_min, eps_decay, visit_threshold, optimistic_value,
                cur, exp_u[t, 0], exp_u[t, 1], step_in == 0 and trial > 0,
            )
            if did_reset:
                log_resets[trial] += 1
            # environment transition: hidden true model, observed successor only
            s = sp % n_mdp
            q = sp // n_mdp
            row = s * n_actions + action
            lo, hi = int(tr_off[row]), int(tr_off[row + 1])
            ue = env_u[t]
            succ = int(tr_succ[hi - 1])
            for k in range(lo, hi):
                if ue < tr_cum[k]:
                    succ = int(tr_succ[k])
                    break
            cur = int(dra_next[q * n_mdp + s]) * n_mdp + succ
    return cur
