"""Numba kernels for trajectory simulation.

Kernels consume pre-drawn uniform variates from per-purpose arrays (one
RNG stream per purpose lives in the calling module) and return their full
state when a chunk runs out, so the caller can refill and resume without
losing bit-exact reproducibility.

All time accumulation is in place; each kernel call processes events until
the horizon is reached (status 0) or more randoms are needed (status 1).
"""

from __future__ import annotations

import numpy as np
from numba import njit

DONE = 0
REFILL = 1


@njit(cache=True)
def _draw_holding(kind, p1, p2, u):
    # kind 0: exponential(rate p1); 1: deterministic(p1); 2: pareto(scale p1, index p2)
    if kind == 0:
        return -np.log1p(-u) / p1
    if kind == 1:
        return p1
    return p1 * (1.0 - u) ** (-1.0 / p2)


@njit(cache=True)
def _pick_neighbor(u, base, count, nbr_idx):
    j = int(u * count)
    if j >= count:
        j = count - 1
    return nbr_idx[base + j]


@njit(cache=True)
def event_kernel(state_i, state_f, horizon, gamma,
                 beta, deg, nbr_indptr, nbr_idx,
                 jump_indptr, jump_idx, jump_cum,
                 hold_kind, hold_p1, hold_p2, has_env,
                 env_u, walk_u, cur,
                 node_time, config_time):
    """Event-driven simulation of (environment, walker).

    state_i = [k, v, steps, env_events]; state_f = [t, next_env, next_w].
    cur = [env cursor, walker cursor]. Walker clocks are exponential with
    rate gamma*beta[k, v] (zero at isolated nodes) and are resampled on
    every walker step and every configuration change.
    """
    k = state_i[0]
    v = state_i[1]
    steps = state_i[2]
    env_events = state_i[3]
    t = state_f[0]
    next_env = state_f[1]
    next_w = state_f[2]
    n = beta.shape[1]
    n_env = env_u.shape[0]
    n_walk = walk_u.shape[0]

    status = DONE
    while True:
        if cur[0] + 2 > n_env or cur[1] + 2 > n_walk:
            status = REFILL
            break
        t_next = next_w if next_w < next_env else next_env
        if t_next >= horizon:
            node_time[v] += horizon - t
            config_time[k] += horizon - t
            t = horizon
            break
        node_time[v] += t_next - t
        config_time[k] += t_next - t
        t = t_next
        if next_w < next_env:
            # walker step: move to a uniformly chosen current neighbor
            count = deg[k, v]
            base = nbr_indptr[k * n + v]
            v = _pick_neighbor(walk_u[cur[1]], base, count, nbr_idx)
            cur[1] += 1
            steps += 1
            rate = gamma * beta[k, v]
            if deg[k, v] > 0 and rate > 0.0:
                next_w = t - np.log1p(-walk_u[cur[1]]) / rate
                cur[1] += 1
            else:
                next_w = np.inf
        else:
            # environment jump: sample next configuration, fresh holding,
            # resample the walker clock (rate may have changed)
            u = env_u[cur[0]]
            cur[0] += 1
            lo = jump_indptr[k]
            hi = jump_indptr[k + 1]
            pick = hi - 1
            for i in range(lo, hi):
                if u < jump_cum[i]:
                    pick = i
                    break
            k = jump_idx[pick]
            env_events += 1
            next_env = t + _draw_holding(hold_kind[k], hold_p1[k], hold_p2[k], env_u[cur[0]])
            cur[0] += 1
            rate = gamma * beta[k, v]
            if deg[k, v] > 0 and rate > 0.0:
                next_w = t - np.log1p(-walk_u[cur[1]]) / rate
                cur[1] += 1
            else:
                next_w = np.inf
        if not has_env:
            next_env = np.inf

    state_i[0] = k
    state_i[1] = v
    state_i[2] = steps
    state_i[3] = env_events
    state_f[0] = t
    state_f[1] = next_env
    state_f[2] = next_w
    return status


@njit(cache=True)
def skip_kernel(state_i, state_f, fstate, horizon, gamma,
                beta, deg, nbr_indptr, nbr_idx, beta_max,
                f_on_prob, f_rate_sum, f_stride,
                cand_rate, samp_rate,
                env_u, cand_u, samp_u, walk_u, cur,
                node_time, config_counts):
    """Skip-ahead simulation for stiff product-form Markovian environments.

    The walker clock is uniformized at rate cand_rate = gamma*beta_max:
    candidate events arrive as a homogeneous Poisson process and are
    accepted with probability beta[config, node]/beta_max, which realizes
    the exact configuration-modulated step rate without visiting the
    environment's own (possibly enormous) event stream. Between processed
    events every two-state factor is advanced in closed form. Node
    occupancy is exact time weighting; configuration occupancy is tallied
    at the processed Poisson events (both streams are homogeneous and
    independent of the system, so tallies converge to time averages).

    state_i = [v, steps]; state_f = [t, t_cand, t_samp];
    cur = [env, cand, samp, walk] cursors.
    """
    v = state_i[0]
    steps = state_i[1]
    t = state_f[0]
    t_cand = state_f[1]
    t_samp = state_f[2]
    nf = fstate.shape[0]
    n = beta.shape[1]

    status = DONE
    while True:
        if (cur[0] + nf > env_u.shape[0] or cur[1] + 1 > cand_u.shape[0]
                or cur[2] + 1 > samp_u.shape[0] or cur[3] + 2 > walk_u.shape[0]):
            status = REFILL
            break
        is_cand = t_cand <= t_samp
        t_next = t_cand if is_cand else t_samp
        if t_next >= horizon:
            node_time[v] += horizon - t
            t = horizon
            break
        node_time[v] += t_next - t
        dt = t_next - t
        t = t_next
        cfg = 0
        for f in range(nf):
            q = f_on_prob[f]
            decay = np.exp(-f_rate_sum[f] * dt)
            if fstate[f] == 1:
                p_on = q + (1.0 - q) * decay
            else:
                p_on = q - q * decay
            if env_u[cur[0]] < p_on:
                fstate[f] = 1
                cfg += f_stride[f]
            else:
                fstate[f] = 0
            cur[0] += 1
        config_counts[cfg] += 1
        if is_cand:
            accept = walk_u[cur[3]] < beta[cfg, v] / beta_max
            cur[3] += 1
            if accept and deg[cfg, v] > 0:
                count = deg[cfg, v]
                base = nbr_indptr[cfg * n + v]
                v = _pick_neighbor(walk_u[cur[3]], base, count, nbr_idx)
                cur[3] += 1
                steps += 1
            t_cand = t - np.log1p(-cand_u[cur[1]]) / cand_rate
            cur[1] += 1
        else:
            t_samp = t - np.log1p(-samp_u[cur[2]]) / samp_rate
            cur[2] += 1

    state_i[0] = v
    state_i[1] = steps
    state_f[0] = t
    state_f[1] = t_cand
    state_f[2] = t_samp
    return status


@njit(cache=True)
def coupling_kernel(state_i, state_f, horizon, gamma,
                    beta, deg, nbr_indptr, nbr_idx,
                    jump_indptr, jump_idx, jump_cum,
                    hold_kind, hold_p1, hold_p2, has_env,
                    env_u, walk1_u, walk2_u, cur):
    """Two independent walkers on one shared environment trajectory.

    Runs until the walkers first occupy the same node (returns DONE with
    the meeting time in state_f[0]) or the horizon is exceeded. Each
    walker consumes its own uniform stream.

    state_i = [k, v1, v2, met]; state_f = [t, next_env, next_w1, next_w2].
    cur = [env, walk1, walk2].
    """
    k = state_i[0]
    v1 = state_i[1]
    v2 = state_i[2]
    t = state_f[0]
    next_env = state_f[1]
    next_w1 = state_f[2]
    next_w2 = state_f[3]
    n = beta.shape[1]

    status = DONE
    while True:
        if (cur[0] + 2 > env_u.shape[0] or cur[1] + 2 > walk1_u.shape[0]
                or cur[2] + 2 > walk2_u.shape[0]):
            status = REFILL
            break
        t_next = min(next_env, next_w1, next_w2)
        if t_next >= horizon:
            t = horizon
            state_i[3] = 0
            break
        t = t_next
        if next_w1 <= next_w2 and next_w1 <= next_env:
            count = deg[k, v1]
            base = nbr_indptr[k * n + v1]
            v1 = _pick_neighbor(walk1_u[cur[1]], base, count, nbr_idx)
            cur[1] += 1
            rate = gamma * beta[k, v1]
            if deg[k, v1] > 0 and rate > 0.0:
                next_w1 = t - np.log1p(-walk1_u[cur[1]]) / rate
                cur[1] += 1
            else:
                next_w1 = np.inf
        elif next_w2 <= next_env:
            count = deg[k, v2]
            base = nbr_indptr[k * n + v2]
            v2 = _pick_neighbor(walk2_u[cur[2]], base, count, nbr_idx)
            cur[2] += 1
            rate = gamma * beta[k, v2]
            if deg[k, v2] > 0 and rate > 0.0:
                next_w2 = t - np.log1p(-walk2_u[cur[2]]) / rate
                cur[2] += 1
            else:
                next_w2 = np.inf
        else:
            u = env_u[cur[0]]
            cur[0] += 1
            lo = jump_indptr[k]
            hi = jump_indptr[k + 1]
            pick = hi - 1
            for i in range(lo, hi):
                if u < jump_cum[i]:
                    pick = i
                    break
            k = jump_idx[pick]
            next_env = t + _draw_holding(hold_kind[k], hold_p1[k], hold_p2[k], env_u[cur[0]])
            cur[0] += 1
            rate1 = gamma * beta[k, v1]
            if deg[k, v1] > 0 and rate1 > 0.0:
                next_w1 = t - np.log1p(-walk1_u[cur[1]]) / rate1
                cur[1] += 1
            else:
                next_w1 = np.inf
            rate2 = gamma * beta[k, v2]
            if deg[k, v2] > 0 and rate2 > 0.0:
                next_w2 = t - np.log1p(-walk2_u[cur[2]]) / rate2
                cur[2] += 1
            else:
                next_w2 = np.inf
            if not has_env:
                next_env = np.inf
        if v1 == v2:
            state_i[3] = 1
            break

    state_i[0] = k
    state_i[1] = v1
    state_i[2] = v2
    state_f[0] = t
    state_f[1] = next_env
    state_f[2] = next_w1
    state_f[3] = next_w2
    return status
