"""Fare-conditioned flow equilibria and multi-start taxi-fare optimization.

The planner's objective is gamma * total_risk + (1 - gamma) * total_latency;
flows are not decision variables but the fixed point of

    f  =  demand * shares(attributes(f), fares)

which a damped iteration solves to tolerance. A derivative-free simplex
search over the fare box [min_fare_i, x_max]^n, restarted from many points,
minimizes the objective; railway capacity enters as a quadratic penalty on
the equilibrium rail flow since the planner cannot clamp it directly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, minimize

from . import kernels, seeding
from .choice import MODE_INDEX, Mode
from .network import (
    FlowState,
    NetworkConfig,
    rail_trip_risk,
    road_latency,
    taxi_trip_risk,
    total_latency,
    total_risk,
    walk_trip_risk,
)
from .population import Population


class EquilibriumError(RuntimeError):
    """Damped iteration failed to reach tolerance; carries the last residual."""

    def __init__(self, residual: float, iterations: int, tol_abs: float):
        super().__init__(
            f"equilibrium not converged after {iterations} iterations: "
            f"residual {residual:.3e} > {tol_abs:.3e}"
        )
        self.residual = residual
        self.iterations = iterations


class OptimizationError(RuntimeError):
    pass


def validate_fares(config: NetworkConfig, fares) -> np.ndarray:
    fares = np.asarray(fares, dtype=float)
    if fares.shape != (config.n_roads,):
        raise ValueError(f"fare vector must have shape ({config.n_roads},)")
    if not np.isfinite(fares).all():
        raise ValueError("fares must be finite")
    minimums = np.array([r.min_taxi_fare for r in config.roads])
    if (fares < minimums - 1e-9).any():
        raise ValueError(f"fares {fares} violate road minimums {minimums}")
    return fares


def option_labels(config: NetworkConfig) -> list[str]:
    """Labels of the present options, in global order."""
    n = config.n_roads
    labels = [f"car_{i + 1}" for i in range(n)] + [f"taxi_{i + 1}" for i in range(n)]
    if config.rail is not None:
        labels.append("rail")
    if config.walk is not None:
        labels.append("walk")
    return labels


@dataclass(frozen=True)
class _Context:
    """Arrays reused across every flow-map application of one run."""

    config: NetworkConfig
    mode_idx: np.ndarray            # (Jp,) kernel mode codes, present options only
    scale: np.ndarray               # (3,)
    avail: np.ndarray               # (G, Jp) availability per user group
    samples: np.ndarray             # (S, 7) pooled samples, grouped contiguously
    weights: np.ndarray             # (S,) weights; per group they sum to n_g/N
    group_offsets: np.ndarray       # (G+1,) sample ranges per group
    net_params: tuple               # flattened network scalars/arrays for kernels
    rail_pos: int                   # position of rail among present options, or -1
    walk_pos: int

    def group_slice(self, g: int) -> slice:
        return slice(self.group_offsets[g], self.group_offsets[g + 1])


def _build_context(config: NetworkConfig, population: Population) -> _Context:
    n = config.n_roads
    mode_codes = [MODE_INDEX[Mode.CAR]] * n + [MODE_INDEX[Mode.TAXI]] * n
    rail_pos = walk_pos = -1
    if config.rail is not None:
        rail_pos = len(mode_codes)
        mode_codes.append(MODE_INDEX[Mode.RAIL])
    if config.walk is not None:
        walk_pos = len(mode_codes)
        mode_codes.append(MODE_INDEX[Mode.WALK])
    n_present = len(mode_codes)

    groups: dict[bool, list] = {}
    for user in population.users:
        groups.setdefault(user.car_owner, []).append(user)
    avail_rows, samples, weights, offsets = [], [], [], [0]
    for car_owner in sorted(groups):
        users = groups[car_owner]
        avail = np.ones(n_present, dtype=bool)
        if not car_owner:
            avail[:n] = False
        avail_rows.append(avail)
        samples.append(np.vstack([u.samples for u in users]))
        weights.append(np.concatenate([
            np.full(u.samples.shape[0], 1.0 / (population.n_users * u.samples.shape[0]))
            for u in users
        ]))
        offsets.append(offsets[-1] + samples[-1].shape[0])

    rail, walk = config.rail, config.walk
    net_params = (
        np.array([r.free_flow_latency for r in config.roads]),
        np.array([r.capacity for r in config.roads]),
        np.array([r.car_cost for r in config.roads]),
        config.bpr_alpha, config.bpr_beta, config.taxi_risk_rate,
        rail is not None,
        rail.latency if rail else 0.0, rail.capacity if rail else 1.0,
        rail.fare if rail else 0.0, rail.full_capacity_risk_rate if rail else 0.0,
        walk is not None,
        walk.latency if walk else 0.0, walk.risk_rate if walk else 0.0,
    )
    return _Context(
        config=config,
        mode_idx=np.asarray(mode_codes, dtype=np.int64),
        scale=population.scales.as_array(),
        avail=np.asarray(avail_rows),
        samples=np.ascontiguousarray(np.vstack(samples)),
        weights=np.concatenate(weights),
        group_offsets=np.asarray(offsets, dtype=np.int64),
        net_params=net_params,
        rail_pos=rail_pos,
        walk_pos=walk_pos,
    )


def _attribute_matrix(config: NetworkConfig, fares: np.ndarray, flow_vec: np.ndarray) -> np.ndarray:
    """Raw (latency, cost, risk) per present option for the given flows."""
    n = config.n_roads
    n_present = 2 * n + (config.rail is not None) + (config.walk is not None)
    attrs = np.empty((n_present, 3))
    for i, road in enumerate(config.roads):
        vehicle_flow = flow_vec[i] + flow_vec[n + i]
        latency = road_latency(road, config.bpr_alpha, config.bpr_beta, vehicle_flow)
        attrs[i] = (latency, road.car_cost, 0.0)
        attrs[n + i] = (latency, fares[i], taxi_trip_risk(config.taxi_risk_rate, latency))
    pos = 2 * n
    if config.rail is not None:
        attrs[pos] = (
            config.rail.latency,
            config.rail.fare,
            rail_trip_risk(config.rail, flow_vec[pos]),
        )
        pos += 1
    if config.walk is not None:
        attrs[pos] = (config.walk.latency, 0.0, walk_trip_risk(config.walk))
    return attrs


def _flow_map_vec(ctx: _Context, fares: np.ndarray, flow_vec: np.ndarray) -> np.ndarray:
    attrs = _attribute_matrix(ctx.config, fares, flow_vec) / ctx.scale
    shares = np.zeros(flow_vec.shape[0])
    for g in range(ctx.avail.shape[0]):
        chunk = ctx.group_slice(g)
        shares += kernels.shares_for_group(
            attrs, ctx.mode_idx, ctx.avail[g], ctx.samples[chunk], ctx.weights[chunk]
        )
    return ctx.config.demand * shares


def _vec_to_flows(ctx: _Context, flow_vec: np.ndarray) -> FlowState:
    n = ctx.config.n_roads
    return FlowState(
        car_flows=flow_vec[:n].copy(),
        taxi_flows=flow_vec[n:2 * n].copy(),
        rail_flow=float(flow_vec[ctx.rail_pos]) if ctx.rail_pos >= 0 else 0.0,
        walk_flow=float(flow_vec[ctx.walk_pos]) if ctx.walk_pos >= 0 else 0.0,
    )


def _flows_to_vec(ctx: _Context, flows: FlowState) -> np.ndarray:
    parts = [flows.car_flows, flows.taxi_flows]
    if ctx.rail_pos >= 0:
        parts.append([flows.rail_flow])
    if ctx.walk_pos >= 0:
        parts.append([flows.walk_flow])
    return np.concatenate(parts).astype(float)


def _flow_state_to_vec(config: NetworkConfig, flows: FlowState) -> np.ndarray:
    parts = [flows.car_flows, flows.taxi_flows]
    if config.rail is not None:
        parts.append([flows.rail_flow])
    if config.walk is not None:
        parts.append([flows.walk_flow])
    return np.concatenate(parts).astype(float)


def build_option_attributes(config: NetworkConfig, fares, flows: FlowState):
    """Per-option (latency, cost, risk) induced by fares and flows.

    Cars: (BPR latency, fixed car cost, 0 risk). Taxis: same latency, the
    fare, risk-rate times latency. Rail: schedule latency, fixed fare,
    crowding risk. Walk: constant latency, free, constant risk.
    Returned in global order with the present-option labels.
    """
    fares = validate_fares(config, fares)
    attrs = _attribute_matrix(config, fares, _flow_state_to_vec(config, flows))
    return attrs, option_labels(config)


@dataclass(frozen=True)
class EquilibriumResult:
    flows: FlowState
    iterations: int
    residual: float  # max-norm residual of the (possibly generalized) map
    boundary: bool = False       # True: tie-straddling generalized equilibrium
    boundary_theta: float | None = None
    boundary_note: str = ""


def flow_map(config: NetworkConfig, fares, population: Population,
             flows: FlowState) -> FlowState:
    """One application of f -> demand * shares(attributes(f)).

    The output always sums to the demand (shares sum to one).
    """
    fares = validate_fares(config, fares)
    ctx = _build_context(config, population)
    return _vec_to_flows(ctx, _flow_map_vec(ctx, fares, _flows_to_vec(ctx, flows)))


_STALL_WINDOW = 25    # iterations without residual progress => treat as stalled
_CYCLE_MEMORY = 8     # exact-repeat detection depth for domination limit cycles


class _Stalled(Exception):
    def __init__(self, flow_vec: np.ndarray, residual: float, iterations: int):
        self.flow_vec = flow_vec
        self.residual = residual
        self.iterations = iterations


def _kernel_loop(ctx: _Context, fares: np.ndarray, flow_vec: np.ndarray, damping: float,
                 tol_abs: float, max_iter: int, map_mode: int = 0,
                 masks_act: np.ndarray | None = None, masks_dom: np.ndarray | None = None,
                 theta: float = 1.0) -> tuple[np.ndarray, int, float]:
    """Run the jitted damped-iteration loop; raises on stall or exhaustion."""
    if masks_act is None:
        masks_act = ctx.avail
    if masks_dom is None:
        masks_dom = ctx.avail
    out, iterations, residual, status = kernels.equilibrium_loop(
        *ctx.net_params,
        np.asarray(fares, dtype=float), ctx.config.demand, ctx.scale,
        ctx.mode_idx, ctx.avail, masks_act, masks_dom, map_mode, theta,
        ctx.samples, ctx.weights, ctx.group_offsets,
        flow_vec, damping, tol_abs, max_iter, _STALL_WINDOW,
        1e-12 * ctx.config.demand,
    )
    out = np.asarray(out)
    if status == 0:
        return out, int(iterations), float(residual)
    # Treat max_iter exhaustion like a stall: slowly-decaying limit cycles
    # around a domination tie look exactly like this, and the boundary
    # resolver either solves them or raises the explicit error.
    raise _Stalled(out, float(residual), int(iterations))


def _active_masks(ctx: _Context, fares: np.ndarray, flow_vec: np.ndarray) -> np.ndarray:
    """(G, Jp) available-and-undominated masks at the given flows."""
    attrs = _attribute_matrix(ctx.config, fares, flow_vec) / ctx.scale
    masks = np.empty_like(ctx.avail)
    for g in range(ctx.avail.shape[0]):
        dominated = np.asarray(kernels.dominated_mask(attrs, ctx.mode_idx, ctx.avail[g]))
        masks[g] = ctx.avail[g] & ~dominated
    return masks


def _frozen_solve(ctx: _Context, fares: np.ndarray, masks: np.ndarray, damping: float,
                  tol_abs: float, max_iter: int, start: np.ndarray,
                  theta_pair=None) -> tuple[np.ndarray, int, float]:
    """Fixed point of the mask-frozen (continuous) map; on a stall the
    damping halves, since only steep-but-smooth feedback can be the cause."""
    if theta_pair is None:
        kwargs = dict(map_mode=1, masks_act=masks)
    else:
        masks_act, masks_dom, theta = theta_pair
        kwargs = dict(map_mode=2, masks_act=masks_act, masks_dom=masks_dom, theta=theta)
    flow_vec = start.copy()
    total_iters = 0
    last_residual = np.inf
    for attempt in range(4):
        try:
            flow_vec, iters, residual = _kernel_loop(
                ctx, fares, flow_vec, damping, tol_abs,
                max(0, max_iter - total_iters), **kwargs
            )
            return flow_vec, total_iters + iters, residual
        except _Stalled as stall:
            total_iters += stall.iterations
            flow_vec = stall.flow_vec
            if np.isfinite(stall.residual):
                last_residual = stall.residual
            damping /= 2.0
    raise EquilibriumError(last_residual, total_iters, tol_abs)


def _find_tie_pair(ctx: _Context, fares: np.ndarray, flow_a: np.ndarray,
                   flow_b: np.ndarray, masks_a: np.ndarray,
                   masks_b: np.ndarray) -> tuple[int, int]:
    """The (flipping option, dominator) pair whose latency tie drives the
    oscillation between the two observed domination patterns."""
    flips = np.argwhere(masks_a != masks_b)
    if flips.shape[0] == 0:
        raise EquilibriumError(np.inf, 0, 0.0)
    group, j = (int(x) for x in flips[0])
    # In whichever state j is dominated, find an option that dominates it.
    for flow_vec, masks in ((flow_a, masks_a), (flow_b, masks_b)):
        if masks[group, j]:
            continue
        attrs = _attribute_matrix(ctx.config, fares, flow_vec) / ctx.scale
        dominated = np.asarray(
            kernels.dominated_mask(attrs, ctx.mode_idx, ctx.avail[group])
        )
        if not dominated[j]:
            continue
        for k in range(attrs.shape[0]):
            if (
                k != j
                and ctx.avail[group, k]
                and ctx.mode_idx[k] == ctx.mode_idx[j]
                and (attrs[k] <= attrs[j]).all()
                and (attrs[k] < attrs[j]).any()
            ):
                return j, k
    raise EquilibriumError(np.inf, 0, 0.0)


_TIE_GAP_TOL = 1e-7  # minutes; far below any behavioral relevance


def _illinois(g, lo: float, g_lo: float, hi: float, g_hi: float,
              xtol: float = 1e-6, gtol: float = _TIE_GAP_TOL,
              max_iter: int = 40) -> float:
    """Regula falsi with the Illinois modification on a bracketing pair
    g(lo) <= 0 <= g(hi); superlinear and bracket-safe."""
    side = 0
    x = lo
    for _ in range(max_iter):
        x = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        gx = g(x)
        if abs(gx) <= gtol or (hi - lo) <= xtol:
            return x
        if gx > 0.0:
            hi, g_hi = x, gx
            if side == 1:
                g_lo *= 0.5
            side = 1
        else:
            lo, g_lo = x, gx
            if side == -1:
                g_hi *= 0.5
            side = -1
    return x


def _resolve_boundary(
    ctx: _Context, fares: np.ndarray, damping: float, tol_abs: float,
    max_iter: int, stall: _Stalled, hint: dict | None = None,
) -> tuple[np.ndarray, int, float, float, str, dict | None]:
    """Generalized (convex-hull) equilibrium at a domination tie.

    The hard-domination map T jumps where road latencies cross, so a fixed
    point can fail to exist; the limit cycle brackets the jump. Kakutani's
    theorem still gives a fixed point of the hull correspondence: f* =
    theta*T_act(f*) + (1-theta)*T_dom(f*) with the tie binding, where T_act
    and T_dom freeze the two observed domination patterns. A root-find on
    theta drives the latency gap of the flipping pair to zero.

    ``hint`` (the previous boundary solution at nearby fares) short-circuits
    the branch checks and narrows the root bracket.
    """
    flow_vec = stall.flow_vec.copy()
    iterations = stall.iterations
    patterns: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
    for _ in range(_CYCLE_MEMORY + 2):
        masks = _active_masks(ctx, fares, flow_vec)
        patterns.setdefault(masks.tobytes(), (masks, flow_vec.copy()))
        flow_vec = (1.0 - damping) * flow_vec + damping * _flow_map_vec(ctx, fares, flow_vec)
        iterations += 1

    if len(patterns) == 2:
        (masks_a, flow_a), (masks_b, flow_b) = patterns.values()
        j, k = _find_tie_pair(ctx, fares, flow_a, flow_b, masks_a, masks_b)
        group = int(np.argwhere(masks_a[:, j] != masks_b[:, j])[0, 0])
        masks_act = masks_a if masks_a[group, j] else masks_b
        masks_dom = masks_b if masks_a[group, j] else masks_a
    elif hint is not None:
        # The iterate can sit on one side of a tie the previous evaluation
        # resolved; reuse its branch masks.
        masks_act, masks_dom = hint["masks_act"], hint["masks_dom"]
        j, k = hint["pair"]
    elif len(patterns) == 1:
        # No domination flip: steep but continuous feedback; retry softer.
        ((masks, _),) = patterns.values()
        flow_vec, iters, residual = _frozen_solve(
            ctx, fares, masks, damping / 4.0, tol_abs, max_iter, flow_vec
        )
        final_masks = _active_masks(ctx, fares, flow_vec)
        if (final_masks == masks).all():
            return flow_vec, iterations + iters, residual, np.nan, "soft-damping", None
        raise EquilibriumError(
            residual if np.isfinite(residual) else stall.residual,
            iterations + iters, tol_abs,
        )
    else:
        raise EquilibriumError(stall.residual, iterations, tol_abs)

    def latency_gap(flow_vec: np.ndarray) -> float:
        attrs = _attribute_matrix(ctx.config, fares, flow_vec)
        return float(attrs[j, 0] - attrs[k, 0])

    state = {"flow": flow_vec, "iters": iterations, "residual": np.inf}

    def gap_at(theta: float) -> float:
        flow, iters, residual = _frozen_solve(
            ctx, fares, masks_act, damping, tol_abs, max_iter, state["flow"],
            theta_pair=(masks_act, masks_dom, theta),
        )
        state["flow"] = flow
        state["iters"] += iters
        state["residual"] = residual
        return latency_gap(flow)

    def finish(theta: float) -> tuple[np.ndarray, int, float, float, str, dict]:
        hint_out = {"masks_act": masks_act, "masks_dom": masks_dom,
                    "pair": (j, k), "theta": theta}
        return (state["flow"], state["iters"], state["residual"],
                theta, f"tie:{j}~{k}", hint_out)

    same_pair = (
        hint is not None
        and hint["pair"] == (j, k)
        and (hint["masks_act"] == masks_act).all()
        and (hint["masks_dom"] == masks_dom).all()
    )
    if same_pair:
        lo = max(0.0, hint["theta"] - 0.15)
        hi = min(1.0, hint["theta"] + 0.15)
        gap_lo, gap_hi = gap_at(lo), gap_at(hi)
        if gap_lo <= 0.0 <= gap_hi:
            if gap_lo == 0.0 or gap_hi == 0.0:
                theta = lo if gap_lo == 0.0 else hi
                gap_at(theta)
                return finish(theta)
            theta = _illinois(gap_at, lo, gap_lo, hi, gap_hi)
            return finish(theta)

    # Check the branch fixed points: a self-consistent one means the plain
    # iteration was merely unstable around a genuine equilibrium.
    for masks in (masks_act, masks_dom):
        branch_vec, iters, residual = _frozen_solve(
            ctx, fares, masks, damping, tol_abs, max_iter, state["flow"]
        )
        state["iters"] += iters
        if (_active_masks(ctx, fares, branch_vec) == masks).all():
            return branch_vec, state["iters"], residual, np.nan, "branch", None

    gap_lo, gap_hi = gap_at(0.0), gap_at(1.0)
    if not gap_lo <= 0.0 <= gap_hi:
        raise EquilibriumError(stall.residual, state["iters"], tol_abs)
    if gap_lo == 0.0 or gap_hi == 0.0:
        theta = 0.0 if gap_lo == 0.0 else 1.0
        gap_at(theta)
        return finish(theta)
    theta = _illinois(gap_at, 0.0, gap_lo, 1.0, gap_hi)
    return finish(theta)


def _solve_vec(ctx: _Context, fares: np.ndarray, damping: float, tol: float,
               max_iter: int, initial: np.ndarray | None, hint: dict | None = None,
               ) -> tuple[np.ndarray, int, float, float | None, str, dict | None]:
    demand = ctx.config.demand
    tol_abs = tol * demand
    if initial is None:
        flow_vec = np.full(ctx.mode_idx.shape[0], demand / ctx.mode_idx.shape[0])
    else:
        flow_vec = initial.astype(float).copy()
    try:
        flow_vec, iterations, residual = _kernel_loop(
            ctx, fares, flow_vec, damping, tol_abs, max_iter
        )
        return flow_vec, iterations, residual, None, "", None
    except _Stalled as stall:
        flow_vec, iterations, residual, theta, note, hint_out = _resolve_boundary(
            ctx, fares, damping, tol_abs, max_iter, stall, hint
        )
        return flow_vec, iterations, residual, theta, note, hint_out


def solve_equilibrium(
    config: NetworkConfig,
    fares,
    population: Population,
    damping: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 5000,
    initial: FlowState | None = None,
) -> EquilibriumResult:
    """Damped fixed-point iteration f <- (1-damping) f + damping flow_map(f).

    Starts from a uniform split of the demand unless ``initial`` is given,
    and stops once the undamped residual max|flow_map(f) - f| drops to
    tol * demand. Non-convergence raises EquilibriumError with the last
    residual; a converged result is never silently approximate.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must be in (0, 1]")
    fares = validate_fares(config, fares)
    ctx = _build_context(config, population)
    initial_vec = None if initial is None else _flows_to_vec(ctx, initial)
    flow_vec, iterations, residual, theta, note, _ = _solve_vec(
        ctx, fares, damping, tol, max_iter, initial_vec
    )
    return EquilibriumResult(
        _vec_to_flows(ctx, flow_vec), iterations, residual,
        boundary=theta is not None, boundary_theta=theta, boundary_note=note,
    )


def equilibrium_multiplicity_gap(
    config: NetworkConfig,
    fares,
    population: Population,
    damping: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 5000,
    seed: int = 0,
) -> float:
    """Max-norm gap between fixed points reached from the uniform split and
    from a random split; a gap above ~10 * tol * demand suggests multiple
    equilibria (reported, not resolved)."""
    fares = validate_fares(config, fares)
    ctx = _build_context(config, population)
    first = _solve_vec(ctx, fares, damping, tol, max_iter, None)[0]
    rng = seeding.rng_for(seed, seeding.START, 0)
    alt = rng.dirichlet(np.ones(ctx.mode_idx.shape[0])) * config.demand
    second = _solve_vec(ctx, fares, damping, tol, max_iter, alt)[0]
    return float(np.abs(first - second).max())


def evaluate_objective(config: NetworkConfig, flows: FlowState, gamma: float,
                       penalty_mu: float = 1e6) -> tuple[float, float]:
    """gamma * risk + (1 - gamma) * latency, plus the rail-capacity penalty.

    Returns (objective value, penalty term); the penalty is exactly 0 when
    the rail flow respects capacity.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    latency = total_latency(config, flows)
    risk = total_risk(config, flows)
    penalty = 0.0
    if config.rail is not None:
        excess = max(0.0, flows.rail_flow - config.rail.capacity)
        penalty = penalty_mu * excess * excess
    return gamma * risk + (1.0 - gamma) * latency + penalty, penalty


@dataclass(frozen=True)
class OptimizationRequest:
    """Knobs for one multi-start fare optimization."""

    gamma: float
    n_starts: int = 100
    x_max: float = 50.0
    seed: int = 0
    damping: float = 0.5
    eq_tol: float = 1e-6
    eq_max_iter: int = 5000
    xatol: float = 0.02    # fare precision, currency
    fatol: float = 2.0     # objective spread, person-minutes/minute scale
    maxfev: int = 100
    penalty_mu: float = 1e6
    threads: int = 1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class StartResult:
    start_index: int
    x0: np.ndarray
    fares: np.ndarray
    objective: float
    n_evaluations: int
    equilibrium_failures: int
    converged: bool
    message: str = ""


@dataclass(frozen=True)
class SolutionReport:
    gamma: float
    fares: np.ndarray
    flows: FlowState
    objective: float
    latency_total: float
    risk_total: float
    rail_penalty: float
    option_attributes: np.ndarray      # (Jp, 3) raw (latency, cost, risk)
    option_names: tuple[str, ...]
    equilibrium_iterations: int
    equilibrium_residual: float
    seed: int
    n_starts: int
    x_max: float
    starts: tuple[StartResult, ...]
    failed_start_indices: tuple[int, ...]


def _run_start(ctx: _Context, request: OptimizationRequest, lower: np.ndarray,
               upper: np.ndarray, start_index: int, x0: np.ndarray) -> StartResult:
    failures = [0]
    # Warm-starting the fixed point (and the boundary pattern) from the
    # previous evaluation saves most iterations; the reported solution is
    # re-solved from the uniform split, so warm starts never leak into
    # results.
    warm: list = [None, None]  # flows, boundary hint

    def objective(x: np.ndarray) -> float:
        try:
            flow_vec, _, _, _, _, hint_out = _solve_vec(
                ctx, x, request.damping, request.eq_tol, request.eq_max_iter,
                warm[0], warm[1],
            )
            warm[0] = flow_vec
            if hint_out is not None:
                warm[1] = hint_out
        except EquilibriumError:
            failures[0] += 1
            warm[0] = None
            return np.inf
        value, _ = evaluate_objective(
            ctx.config, _vec_to_flows(ctx, flow_vec), request.gamma, request.penalty_mu
        )
        return value

    result = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=Bounds(lower, upper),
        options=dict(
            xatol=request.xatol, fatol=request.fatol,
            maxfev=request.maxfev, disp=False,
        ),
    )
    fares = np.clip(result.x, lower, upper)
    value = float(objective(fares))
    return StartResult(
        start_index=start_index,
        x0=x0,
        fares=fares,
        objective=value,
        n_evaluations=int(result.nfev) + 1,
        equilibrium_failures=failures[0],
        converged=bool(np.isfinite(value)),
        message=str(result.message),
    )


def optimize_fares(request: OptimizationRequest, config: NetworkConfig,
                   population: Population) -> SolutionReport:
    """Multi-start Nelder-Mead over the fare box.

    Start 0 anchors at the minimum fares; the rest are uniform draws from
    per-start seed streams, so a longer run only appends starts (the best
    objective is non-increasing in n_starts for a fixed seed). Exactly-tied
    objectives break toward the lexicographically smallest fare vector.
    Starts whose equilibrium fails at the returned point are recorded and
    skipped; if all fail, OptimizationError.
    """
    lower = np.array([r.min_taxi_fare for r in config.roads])
    if request.x_max <= lower.max():
        raise ValueError(f"x_max {request.x_max} must exceed every minimum fare {lower}")
    upper = np.full_like(lower, request.x_max)
    ctx = _build_context(config, population)

    def x0_for(index: int) -> np.ndarray:
        if index == 0:
            return lower.copy()
        rng = seeding.rng_for(request.seed, seeding.START, index)
        return rng.uniform(lower, upper)

    starts_x0 = [x0_for(i) for i in range(request.n_starts)]
    if request.threads > 1:
        with ThreadPoolExecutor(max_workers=request.threads) as pool:
            starts = list(pool.map(
                lambda pair: _run_start(ctx, request, lower, upper, *pair),
                enumerate(starts_x0),
            ))
    else:
        starts = [_run_start(ctx, request, lower, upper, i, x0)
                  for i, x0 in enumerate(starts_x0)]

    succeeded = [s for s in starts if s.converged]
    failed = tuple(s.start_index for s in starts if not s.converged)
    if not succeeded:
        raise OptimizationError(
            f"all {request.n_starts} starts failed equilibrium convergence"
        )
    best = min(succeeded, key=lambda s: (s.objective, tuple(s.fares)))

    flow_vec, iterations, residual, _, _, _ = _solve_vec(
        ctx, best.fares, request.damping, request.eq_tol, request.eq_max_iter, None
    )
    flows = _vec_to_flows(ctx, flow_vec)
    objective_value, penalty = evaluate_objective(
        config, flows, request.gamma, request.penalty_mu
    )
    return SolutionReport(
        gamma=request.gamma,
        fares=best.fares,
        flows=flows,
        objective=objective_value,
        latency_total=total_latency(config, flows),
        risk_total=total_risk(config, flows),
        rail_penalty=penalty,
        option_attributes=_attribute_matrix(config, best.fares, flow_vec),
        option_names=tuple(option_labels(config)),
        equilibrium_iterations=iterations,
        equilibrium_residual=residual,
        seed=request.seed,
        n_starts=request.n_starts,
        x_max=request.x_max,
        starts=tuple(starts),
        failed_start_indices=failed,
    )


@dataclass(frozen=True)
class SweepPoint:
    gamma: float
    report: SolutionReport | None
    error: str = ""


def pareto_sweep(gammas, config: NetworkConfig, population: Population,
                 request: OptimizationRequest) -> list[SweepPoint]:
    """One optimize_fares run per gamma (same seed, so the same fare starts
    are compared across the grid); per-point failures are recorded in the
    output without aborting the sweep."""
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("gamma grid must be non-empty")
    if any(not 0.0 <= g <= 1.0 for g in gammas):
        raise ValueError("gamma grid values must lie in [0, 1]")
    points = []
    for gamma in gammas:
        point_request = OptimizationRequest(
            gamma=gamma, n_starts=request.n_starts, x_max=request.x_max,
            seed=request.seed, damping=request.damping, eq_tol=request.eq_tol,
            eq_max_iter=request.eq_max_iter, xatol=request.xatol,
            fatol=request.fatol, maxfev=request.maxfev,
            penalty_mu=request.penalty_mu, threads=request.threads,
        )
        try:
            points.append(SweepPoint(gamma, optimize_fares(point_request, config, population)))
        except (OptimizationError, EquilibriumError) as err:
            points.append(SweepPoint(gamma, None, error=str(err)))
    return points
