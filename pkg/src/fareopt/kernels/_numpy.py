"""Pure-numpy implementations of the hot numerical kernels.

These define the semantics of record; the numba versions in ``_numba`` must
agree with them to float precision. Selected with FAREOPT_BACKEND=numpy, or
automatically when numba is unavailable.

Conventions shared by both backends:

* ``attrs`` holds normalized (latency, cost, risk) per option, shape (J, 3).
* ``mode_idx`` maps each option to 0=car, 1=taxi, 2=rail, 3=walk; the mode
  bias of option j is ``omega[3 + mode_idx[j]]``.
* ``avail`` marks which options the user can see at all; domination is
  evaluated inside the kernels among available same-mode options, and
  dominated options get probability exactly 0.0.
* Callers guarantee at least one available option per row.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def dominated_mask(attrs: np.ndarray, mode_idx: np.ndarray, avail: np.ndarray) -> np.ndarray:
    """Options weakly worse than an available same-mode option, strictly in one attribute.

    Supports a leading batch dimension: attrs (..., J, 3), mode_idx/avail (..., J).
    """
    weakly = (attrs[..., None, :, :] <= attrs[..., :, None, :]).all(-1)  # [j, k]: k <= j all
    strictly = (attrs[..., None, :, :] < attrs[..., :, None, :]).any(-1)
    same_mode = mode_idx[..., :, None] == mode_idx[..., None, :]
    dominated_by = weakly & strictly & same_mode & avail[..., None, :]
    return dominated_by.any(-1) & avail


def _utilities(attrs: np.ndarray, mode_idx: np.ndarray, samples: np.ndarray) -> np.ndarray:
    return samples[:, :3] @ attrs.T + samples[:, 3 + mode_idx]


def choice_prob_matrix(
    attrs: np.ndarray, mode_idx: np.ndarray, avail: np.ndarray, samples: np.ndarray
) -> np.ndarray:
    """Logit choice probabilities, one row per preference sample: (M, J)."""
    active = avail & ~dominated_mask(attrs, mode_idx, avail)
    u = np.where(active, _utilities(attrs, mode_idx, samples), -np.inf)
    u -= u.max(axis=1, keepdims=True)
    e = np.exp(u)
    return e / e.sum(axis=1, keepdims=True)


def shares_for_group(
    attrs: np.ndarray,
    mode_idx: np.ndarray,
    avail: np.ndarray,
    samples: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Weighted sum of choice probabilities over a sample matrix: (J,)."""
    return weights @ choice_prob_matrix(attrs, mode_idx, avail, samples)


def shares_frozen(
    attrs: np.ndarray,
    mode_idx: np.ndarray,
    active: np.ndarray,
    samples: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Like shares_for_group but with the active mask supplied directly
    (no domination pass); the equilibrium boundary solver freezes masks."""
    u = np.where(active, _utilities(attrs, mode_idx, samples), -np.inf)
    u -= u.max(axis=1, keepdims=True)
    e = np.exp(u)
    return weights @ (e / e.sum(axis=1, keepdims=True))


def info_gain_scores(
    attrs: np.ndarray, mode_idx: np.ndarray, avail: np.ndarray, samples: np.ndarray
) -> np.ndarray:
    """Sampled mutual-information score per candidate query.

    attrs (C, J, 3), mode_idx/avail (C, J), samples (M, 7) -> (C,) scores in
    nats: (1/M) sum_j sum_m P[m,j] * log(M * P[m,j] / sum_m' P[m',j]).
    """
    n_cand = attrs.shape[0]
    n_samples = samples.shape[0]
    out = np.empty(n_cand)
    for c in range(n_cand):
        probs = choice_prob_matrix(attrs[c], mode_idx[c], avail[c], samples)
        col = probs.sum(axis=0)
        ratio = np.zeros_like(probs)
        pos = probs > 0.0
        np.divide(n_samples * probs, col[None, :], out=ratio, where=pos)
        np.log(ratio, out=ratio, where=pos)
        out[c] = (probs * ratio).sum() / n_samples
    return out


def build_attributes(
    road_a, road_cap, road_cost, bpr_alpha, bpr_beta, taxi_rr,
    has_rail, rail_lat, rail_cap, rail_fare, rail_frr,
    has_walk, walk_lat, walk_rr,
    fares, scale, flow_vec,
) -> np.ndarray:
    """Normalized per-option attributes for an equilibrium flow vector.

    Option layout: cars 0..n-1, taxis n..2n-1, then rail and walk when
    present. Shared by both backends' equilibrium loops.
    """
    n = road_a.shape[0]
    attrs = np.empty((flow_vec.shape[0], 3))
    vehicle = flow_vec[:n] + flow_vec[n:2 * n]
    latency = road_a * (1.0 + bpr_alpha * (vehicle / road_cap) ** bpr_beta)
    attrs[:n, 0] = latency / scale[0]
    attrs[:n, 1] = road_cost / scale[1]
    attrs[:n, 2] = 0.0
    attrs[n:2 * n, 0] = latency / scale[0]
    attrs[n:2 * n, 1] = fares / scale[1]
    attrs[n:2 * n, 2] = taxi_rr * latency / scale[2]
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


def equilibrium_loop(
    road_a, road_cap, road_cost, bpr_alpha, bpr_beta, taxi_rr,
    has_rail, rail_lat, rail_cap, rail_fare, rail_frr,
    has_walk, walk_lat, walk_rr,
    fares, demand, scale,
    mode_idx, avail, masks_act, masks_dom, map_mode, theta,
    samples, weights, group_offsets,
    f0, damping, tol_abs, max_iter, stall_window, cycle_eps,
):
    """Damped fixed-point iteration f <- (1-damping) f + damping T(f).

    map_mode selects T: 0 recomputes domination from the current attributes
    (the hard map), 1 freezes the active masks to ``masks_act``, 2 blends
    theta * T[masks_act] + (1-theta) * T[masks_dom] (the convex-hull map
    used on domination ties). Returns (f, iterations, residual, status)
    with status 0 converged, 1 stalled/limit cycle, 2 max_iter exhausted.
    """
    n_groups = group_offsets.shape[0] - 1
    flow_vec = f0.astype(np.float64).copy()
    best_residual = np.inf
    last_progress = 0
    history: list[np.ndarray] = []
    residual = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        attrs = build_attributes(
            road_a, road_cap, road_cost, bpr_alpha, bpr_beta, taxi_rr,
            has_rail, rail_lat, rail_cap, rail_fare, rail_frr,
            has_walk, walk_lat, walk_rr, fares, scale, flow_vec,
        )
        shares = np.zeros(flow_vec.shape[0])
        for g in range(n_groups):
            chunk = slice(group_offsets[g], group_offsets[g + 1])
            if map_mode == 0:
                active = avail[g] & ~dominated_mask(attrs, mode_idx, avail[g])
                shares += shares_frozen(attrs, mode_idx, active, samples[chunk], weights[chunk])
            elif map_mode == 1:
                shares += shares_frozen(attrs, mode_idx, masks_act[g], samples[chunk], weights[chunk])
            else:
                shares += theta * shares_frozen(
                    attrs, mode_idx, masks_act[g], samples[chunk], weights[chunk]
                )
                shares += (1.0 - theta) * shares_frozen(
                    attrs, mode_idx, masks_dom[g], samples[chunk], weights[chunk]
                )
        mapped = demand * shares
        residual = float(np.abs(mapped - flow_vec).max())
        if residual <= tol_abs:
            return flow_vec, iteration, residual, 0
        if residual < 0.9 * best_residual:
            best_residual = residual
            last_progress = iteration
        elif iteration - last_progress >= stall_window:
            return flow_vec, iteration, residual, 1
        flow_vec = (1.0 - damping) * flow_vec + damping * mapped
        for seen in history:
            if np.abs(flow_vec - seen).max() <= cycle_eps:
                return flow_vec, iteration, residual, 1
        history.append(flow_vec.copy())
        if len(history) > 8:
            history.pop(0)
    return flow_vec, max_iter, residual, 2


def _log_posterior(
    omega: np.ndarray,
    rec_attrs: np.ndarray,
    rec_mode: np.ndarray,
    rec_active: np.ndarray,
    chosen: np.ndarray,
    sign_constrained: bool,
) -> float:
    if omega @ omega > 1.0:
        return -np.inf
    if sign_constrained and (omega[:3] > 0.0).any():
        return -np.inf
    n_rec = rec_attrs.shape[0]
    if n_rec == 0:
        return 0.0
    u = rec_attrs @ omega[:3] + omega[3 + rec_mode]  # (R, J)
    u = np.where(rec_active, u, -np.inf)
    m = u.max(axis=1)
    lse = m + np.log(np.exp(u - m[:, None]).sum(axis=1))
    return float((u[np.arange(n_rec), chosen] - lse).sum())


def mh_chain(
    rec_attrs: np.ndarray,
    rec_mode: np.ndarray,
    rec_avail: np.ndarray,
    chosen: np.ndarray,
    sign_constrained: bool,
    start: np.ndarray,
    sigma: float,
    normals: np.ndarray,
    log_unifs: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Random-walk Metropolis over the unit-ball logit posterior.

    All randomness is pre-drawn (normals (T, 7), log_unifs (T,)) so both
    backends consume identical entropy. Returns the full chain and the
    number of accepted proposals.
    """
    n_rec = rec_attrs.shape[0]
    rec_active = np.zeros_like(rec_avail)
    for r in range(n_rec):
        rec_active[r] = rec_avail[r] & ~dominated_mask(rec_attrs[r], rec_mode[r], rec_avail[r])
    n_steps = normals.shape[0]
    chain = np.empty((n_steps, start.shape[0]))
    current = start.astype(np.float64).copy()
    lp_current = _log_posterior(current, rec_attrs, rec_mode, rec_active, chosen, sign_constrained)
    n_accept = 0
    for t in range(n_steps):
        candidate = current + sigma * normals[t]
        lp_candidate = _log_posterior(
            candidate, rec_attrs, rec_mode, rec_active, chosen, sign_constrained
        )
        if lp_candidate - lp_current > log_unifs[t]:
            current = candidate
            lp_current = lp_candidate
            n_accept += 1
        chain[t] = current
    return chain, n_accept
