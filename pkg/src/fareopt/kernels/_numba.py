"""Numba-jitted twins of the kernels in ``_numpy``.

Same signatures, same math, loop form instead of vectorized form. All
functions are nopython, nogil (safe to drive from a thread pool) and cached
on disk so CLI invocations do not pay the compile cost twice.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND_NAME = "numba"

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _dominated_single(attrs, mode_idx, avail, out):
    n_opt = attrs.shape[0]
    for j in range(n_opt):
        out[j] = False
        if not avail[j]:
            continue
        for k in range(n_opt):
            if k == j or not avail[k] or mode_idx[k] != mode_idx[j]:
                continue
            weakly = (
                attrs[k, 0] <= attrs[j, 0]
                and attrs[k, 1] <= attrs[j, 1]
                and attrs[k, 2] <= attrs[j, 2]
            )
            strictly = (
                attrs[k, 0] < attrs[j, 0]
                or attrs[k, 1] < attrs[j, 1]
                or attrs[k, 2] < attrs[j, 2]
            )
            if weakly and strictly:
                out[j] = True
                break


@njit(**_JIT)
def dominated_mask(attrs, mode_idx, avail):
    out = np.empty(avail.shape, dtype=np.bool_)
    if attrs.ndim == 2:
        _dominated_single(attrs, mode_idx, avail, out)
    else:
        for c in range(attrs.shape[0]):
            _dominated_single(attrs[c], mode_idx[c], avail[c], out[c])
    return out


@njit(**_JIT)
def _probs_row(attrs, mode_idx, active, omega, out):
    n_opt = attrs.shape[0]
    m = -np.inf
    for j in range(n_opt):
        if active[j]:
            u = (
                omega[0] * attrs[j, 0]
                + omega[1] * attrs[j, 1]
                + omega[2] * attrs[j, 2]
                + omega[3 + mode_idx[j]]
            )
            out[j] = u
            if u > m:
                m = u
        else:
            out[j] = 0.0
    s = 0.0
    for j in range(n_opt):
        if active[j]:
            out[j] = np.exp(out[j] - m)
            s += out[j]
    for j in range(n_opt):
        if active[j]:
            out[j] /= s


@njit(**_JIT)
def choice_prob_matrix(attrs, mode_idx, avail, samples):
    active = np.empty(avail.shape[0], dtype=np.bool_)
    _dominated_single(attrs, mode_idx, avail, active)
    for j in range(avail.shape[0]):
        active[j] = avail[j] and not active[j]
    n_samples = samples.shape[0]
    out = np.empty((n_samples, attrs.shape[0]))
    for s in range(n_samples):
        _probs_row(attrs, mode_idx, active, samples[s], out[s])
    return out


@njit(**_JIT)
def shares_for_group(attrs, mode_idx, avail, samples, weights):
    active = np.empty(avail.shape[0], dtype=np.bool_)
    _dominated_single(attrs, mode_idx, avail, active)
    for j in range(avail.shape[0]):
        active[j] = avail[j] and not active[j]
    n_opt = attrs.shape[0]
    h = np.zeros(n_opt)
    row = np.empty(n_opt)
    for s in range(samples.shape[0]):
        _probs_row(attrs, mode_idx, active, samples[s], row)
        for j in range(n_opt):
            h[j] += weights[s] * row[j]
    return h


@njit(**_JIT)
def shares_frozen(attrs, mode_idx, active, samples, weights):
    n_opt = attrs.shape[0]
    h = np.zeros(n_opt)
    row = np.empty(n_opt)
    for s in range(samples.shape[0]):
        _probs_row(attrs, mode_idx, active, samples[s], row)
        for j in range(n_opt):
            h[j] += weights[s] * row[j]
    return h


@njit(**_JIT)
def info_gain_scores(attrs, mode_idx, avail, samples):
    n_cand = attrs.shape[0]
    n_opt = attrs.shape[1]
    n_samples = samples.shape[0]
    out = np.empty(n_cand)
    probs = np.empty((n_samples, n_opt))
    active = np.empty(n_opt, dtype=np.bool_)
    for c in range(n_cand):
        _dominated_single(attrs[c], mode_idx[c], avail[c], active)
        for j in range(n_opt):
            active[j] = avail[c, j] and not active[j]
        for s in range(n_samples):
            _probs_row(attrs[c], mode_idx[c], active, samples[s], probs[s])
        score = 0.0
        for j in range(n_opt):
            col = 0.0
            for s in range(n_samples):
                col += probs[s, j]
            if col <= 0.0:
                continue
            for s in range(n_samples):
                p = probs[s, j]
                if p > 0.0:
                    score += p * np.log(n_samples * p / col)
        out[c] = score / n_samples
    return out


@njit(**_JIT)
def build_attributes(
    road_a, road_cap, road_cost, bpr_alpha, bpr_beta, taxi_rr,
    has_rail, rail_lat, rail_cap, rail_fare, rail_frr,
    has_walk, walk_lat, walk_rr,
    fares, scale, flow_vec,
):
    n = road_a.shape[0]
    attrs = np.empty((flow_vec.shape[0], 3))
    for i in range(n):
        vehicle = flow_vec[i] + flow_vec[n + i]
        latency = road_a[i] * (1.0 + bpr_alpha * (vehicle / road_cap[i]) ** bpr_beta)
        attrs[i, 0] = latency / scale[0]
        attrs[i, 1] = road_cost[i] / scale[1]
        attrs[i, 2] = 0.0
        attrs[n + i, 0] = latency / scale[0]
        attrs[n + i, 1] = fares[i] / scale[1]
        attrs[n + i, 2] = taxi_rr * latency / scale[2]
    pos = 2 * n
    if has_rail:
        attrs[pos, 0] = rail_lat / scale[0]
        attrs[pos, 1] = rail_fare / scale[1]
        attrs[pos, 2] = rail_lat * rail_frr * flow_vec[pos] / rail_cap / scale[2]
        pos += 1
    if has_walk:
        attrs[pos, 0] = walk_lat / scale[0]
        attrs[pos, 1] = 0.0
        attrs[pos, 2] = walk_lat * walk_rr / scale[2]
    return attrs


@njit(**_JIT)
def _accumulate_frozen(attrs, mode_idx, active, samples, weights, factor, shares, row):
    for s in range(samples.shape[0]):
        _probs_row(attrs, mode_idx, active, samples[s], row)
        for j in range(shares.shape[0]):
            shares[j] += factor * weights[s] * row[j]


@njit(**_JIT)
def equilibrium_loop(
    road_a, road_cap, road_cost, bpr_alpha, bpr_beta, taxi_rr,
    has_rail, rail_lat, rail_cap, rail_fare, rail_frr,
    has_walk, walk_lat, walk_rr,
    fares, demand, scale,
    mode_idx, avail, masks_act, masks_dom, map_mode, theta,
    samples, weights, group_offsets,
    f0, damping, tol_abs, max_iter, stall_window, cycle_eps,
):
    n_groups = group_offsets.shape[0] - 1
    n_opt = f0.shape[0]
    flow_vec = f0.astype(np.float64).copy()
    best_residual = np.inf
    last_progress = 0
    history = np.empty((8, n_opt))
    n_hist = 0
    hist_next = 0
    residual = np.inf
    row = np.empty(n_opt)
    active = np.empty(n_opt, dtype=np.bool_)
    for iteration in range(1, max_iter + 1):
        attrs = build_attributes(
            road_a, road_cap, road_cost, bpr_alpha, bpr_beta, taxi_rr,
            has_rail, rail_lat, rail_cap, rail_fare, rail_frr,
            has_walk, walk_lat, walk_rr, fares, scale, flow_vec,
        )
        shares = np.zeros(n_opt)
        for g in range(n_groups):
            lo, hi = group_offsets[g], group_offsets[g + 1]
            if map_mode == 0:
                _dominated_single(attrs, mode_idx, avail[g], active)
                for j in range(n_opt):
                    active[j] = avail[g, j] and not active[j]
                _accumulate_frozen(attrs, mode_idx, active, samples[lo:hi],
                                   weights[lo:hi], 1.0, shares, row)
            elif map_mode == 1:
                _accumulate_frozen(attrs, mode_idx, masks_act[g], samples[lo:hi],
                                   weights[lo:hi], 1.0, shares, row)
            else:
                _accumulate_frozen(attrs, mode_idx, masks_act[g], samples[lo:hi],
                                   weights[lo:hi], theta, shares, row)
                _accumulate_frozen(attrs, mode_idx, masks_dom[g], samples[lo:hi],
                                   weights[lo:hi], 1.0 - theta, shares, row)
        residual = 0.0
        for j in range(n_opt):
            diff = abs(demand * shares[j] - flow_vec[j])
            if diff > residual:
                residual = diff
        if residual <= tol_abs:
            return flow_vec, iteration, residual, 0
        if residual < 0.9 * best_residual:
            best_residual = residual
            last_progress = iteration
        elif iteration - last_progress >= stall_window:
            return flow_vec, iteration, residual, 1
        for j in range(n_opt):
            flow_vec[j] = (1.0 - damping) * flow_vec[j] + damping * demand * shares[j]
        for h in range(n_hist):
            gap = 0.0
            for j in range(n_opt):
                diff = abs(flow_vec[j] - history[h, j])
                if diff > gap:
                    gap = diff
            if gap <= cycle_eps:
                return flow_vec, iteration, residual, 1
        history[hist_next] = flow_vec
        hist_next = (hist_next + 1) % 8
        if n_hist < 8:
            n_hist += 1
    return flow_vec, max_iter, residual, 2


@njit(**_JIT)
def _log_posterior(omega, rec_attrs, rec_mode, rec_active, chosen, sign_constrained):
    norm_sq = 0.0
    for d in range(omega.shape[0]):
        norm_sq += omega[d] * omega[d]
    if norm_sq > 1.0:
        return -np.inf
    if sign_constrained and (omega[0] > 0.0 or omega[1] > 0.0 or omega[2] > 0.0):
        return -np.inf
    total = 0.0
    for r in range(rec_attrs.shape[0]):
        m = -np.inf
        u_chosen = 0.0
        for j in range(rec_attrs.shape[1]):
            if not rec_active[r, j]:
                continue
            u = (
                omega[0] * rec_attrs[r, j, 0]
                + omega[1] * rec_attrs[r, j, 1]
                + omega[2] * rec_attrs[r, j, 2]
                + omega[3 + rec_mode[r, j]]
            )
            if u > m:
                m = u
            if j == chosen[r]:
                u_chosen = u
        s = 0.0
        for j in range(rec_attrs.shape[1]):
            if rec_active[r, j]:
                u = (
                    omega[0] * rec_attrs[r, j, 0]
                    + omega[1] * rec_attrs[r, j, 1]
                    + omega[2] * rec_attrs[r, j, 2]
                    + omega[3 + rec_mode[r, j]]
                )
                s += np.exp(u - m)
        total += u_chosen - (m + np.log(s))
    return total


@njit(**_JIT)
def mh_chain(
    rec_attrs,
    rec_mode,
    rec_avail,
    chosen,
    sign_constrained,
    start,
    sigma,
    normals,
    log_unifs,
):
    n_rec = rec_attrs.shape[0]
    rec_active = np.empty(rec_avail.shape, dtype=np.bool_)
    for r in range(n_rec):
        _dominated_single(rec_attrs[r], rec_mode[r], rec_avail[r], rec_active[r])
        for j in range(rec_avail.shape[1]):
            rec_active[r, j] = rec_avail[r, j] and not rec_active[r, j]
    n_steps = normals.shape[0]
    dim = start.shape[0]
    chain = np.empty((n_steps, dim))
    current = start.astype(np.float64).copy()
    candidate = np.empty(dim)
    lp_current = _log_posterior(current, rec_attrs, rec_mode, rec_active, chosen, sign_constrained)
    n_accept = 0
    for t in range(n_steps):
        for d in range(dim):
            candidate[d] = current[d] + sigma * normals[t, d]
        lp_candidate = _log_posterior(
            candidate, rec_attrs, rec_mode, rec_active, chosen, sign_constrained
        )
        if lp_candidate - lp_current > log_unifs[t]:
            for d in range(dim):
                current[d] = candidate[d]
            lp_current = lp_candidate
            n_accept += 1
        chain[t] = current
    return chain, n_accept
