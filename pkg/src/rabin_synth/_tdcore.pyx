# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled TD-learning kernel.

Twin of `_td_python.run_kernel`: same update, same float op order, same
consumption of the pre-drawn uniform arrays, so results are bit-identical
across backends.  Keep the two files in sync.
"""

from libc.math cimport INFINITY


cdef inline double _lookahead(
    double[::1] u, unsigned char[::1] visited, double[::1] w,
    long long[:, ::1] n_sa, long long[:, :, ::1] n_succ, int[::1] dra_next,
    int n_mdp, int s, int a, int q,
) noexcept nogil:
    cdef long long tot = n_sa[s, a]
    cdef long long c
    cdef int t, base, tgt
    cdef double qv, uval
    if tot == 0:
        return 0.0
    base = dra_next[q * n_mdp + s] * n_mdp
    qv = 0.0
    for t in range(n_mdp):
        c = n_succ[s, a, t]
        if c != 0:
            tgt = base + t
            if visited[tgt]:
                uval = u[tgt]
            else:
                uval = w[tgt]
            qv = qv + (<double> c / <double> tot) * uval
    return qv


def run_kernel(
    double[::1] u, unsigned char[::1] visited,
    long long[:, ::1] n_sa, long long[:, :, ::1] n_succ,
    int[::1] pi,
    long long[::1] istate, double[::1] fstate,
    double[::1] w, unsigned char[::1] rej_sink, int[::1] dra_next,
    long long[::1] en_off, int[::1] en_act,
    long long[::1] tr_off, int[::1] tr_succ, double[::1] tr_cum,
    unsigned char[::1] g_mask, unsigned char[::1] b_mask,
    double[::1] env_u, double[:, ::1] exp_u,
    long long[::1] log_g, long long[::1] log_b, long long[::1] log_resets,
    int trials, int steps_per_trial,
    int n_mdp, int n_dra, int n_actions,
    double alpha, double gamma, int reset_interval, int q0,
    int strat_kind, double eps_min, double eps_decay,
    long long visit_threshold, double optimistic_value,
    int start_state,
):
    cdef int cur = start_state
    cdef int trial, step_in, sp, s, q, prev, pa, ps, pq
    cdef int a, k, j, lo, hi, n_en, action, best_a, succ, row
    cdef long long t
    cdef double u0, u1, ue, qv, best, eps, e
    cdef bint did_reset, force

    for trial in range(trials):
        for step_in in range(steps_per_trial):
            t = <long long> trial * steps_per_trial + step_in
            log_g[trial] += g_mask[cur]
            log_b[trial] += b_mask[cur]
            u0 = exp_u[t, 0]
            u1 = exp_u[t, 1]
            force = step_in == 0 and trial > 0

            # --- core step (mirror of _td_python.core_step) ---
            sp = cur
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
                prev = <int> istate[0]
                pa = <int> istate[1]
                ps = prev % n_mdp
                pq = prev // n_mdp
                n_sa[ps, pa] += 1
                n_succ[ps, pa, s] += 1
                best = -INFINITY
                best_a = -1
                for k in range(<int> en_off[ps], <int> en_off[ps + 1]):
                    a = en_act[k]
                    qv = _lookahead(u, visited, w, n_sa, n_succ, dra_next,
                                    n_mdp, ps, a, pq)
                    if qv > best:
                        best = qv
                        best_a = a
                u[prev] = alpha * u[prev] + (1.0 - alpha) * (w[prev] + gamma * best)
                pi[prev] = best_a

            lo = <int> en_off[s]
            hi = <int> en_off[s + 1]
            n_en = hi - lo
            if strat_kind == 0:    # uniform
                j = <int> (u0 * n_en)
                if j >= n_en:
                    j = n_en - 1
                action = en_act[lo + j]
            elif strat_kind == 1:  # epsilon-greedy with decay
                eps = fstate[0]
                if u0 < eps:
                    j = <int> (u1 * n_en)
                    if j >= n_en:
                        j = n_en - 1
                    action = en_act[lo + j]
                else:
                    action = pi[sp]
                e = eps * eps_decay
                if e > eps_min:
                    fstate[0] = e
                else:
                    fstate[0] = eps_min
            else:                  # optimistic count-based
                best = -INFINITY
                action = -1
                for k in range(lo, hi):
                    a = en_act[k]
                    if n_sa[s, a] < visit_threshold:
                        qv = optimistic_value
                    else:
                        qv = _lookahead(u, visited, w, n_sa, n_succ, dra_next,
                                        n_mdp, s, a, q)
                    if qv > best:
                        best = qv
                        action = a
            istate[0] = sp
            istate[1] = action
            istate[2] += 1
            istate[3] += 1
            if did_reset:
                log_resets[trial] += 1

            # --- environment transition ---
            row = s * n_actions + action
            lo = <int> tr_off[row]
            hi = <int> tr_off[row + 1]
            ue = env_u[t]
            succ = tr_succ[hi - 1]
            for k in range(lo, hi):
                if ue < tr_cum[k]:
                    succ = tr_succ[k]
                    break
            cur = dra_next[q * n_mdp + s] * n_mdp + succ
    return cur
