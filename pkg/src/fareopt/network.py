"""Static network description and the latency/risk physics of each mode.

Units are fixed throughout the toolkit: minutes for latency, an abstract
currency for monetary cost, risk-units/minute for infection risk rates, and
persons/minute for flows (a fluid model; no integrality). Private cars
contribute zero infection risk. A network always has at least one road;
the railway and the walking path are optional.

All operations here are pure functions of their inputs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _jsonloc


class ConfigError(ValueError):
    """A network config document failed schema validation.

    ``problems`` lists every violation found, each already formatted with
    the source line when one is known.
    """

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


def _require(condition: bool, message: str):
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class RoadSpec:
    """One parallel road, shared by private cars and taxis."""

    free_flow_latency: float  # minutes on an empty road
    capacity: float           # vehicles/minute
    car_cost: float           # currency per private-car trip (fixed)
    min_taxi_fare: float      # currency, lower bound for fare optimization

    def __post_init__(self):
        _require(self.free_flow_latency > 0, "free_flow_latency must be > 0")
        _require(self.capacity > 0, "capacity must be > 0")
        _require(self.car_cost >= 0, "car_cost must be >= 0")
        _require(self.min_taxi_fare >= 0, "min_taxi_fare must be >= 0")


@dataclass(frozen=True)
class RailSpec:
    """The railway: fixed schedule latency, fixed fare, crowding-driven risk."""

    latency: float                  # minutes, independent of load
    capacity: float                 # passengers/minute
    fare: float                     # currency (not optimized)
    full_capacity_risk_rate: float  # risk-units/minute on a 100%-full train

    def __post_init__(self):
        _require(self.latency > 0, "latency must be > 0")
        _require(self.capacity > 0, "capacity must be > 0")
        _require(self.fare >= 0, "fare must be >= 0")
        _require(self.full_capacity_risk_rate >= 0, "full_capacity_risk_rate must be >= 0")


@dataclass(frozen=True)
class WalkSpec:
    """The walking path: constant latency, free, constant risk rate."""

    latency: float    # minutes
    risk_rate: float  # risk-units/minute per pedestrian

    def __post_init__(self):
        _require(self.latency > 0, "latency must be > 0")
        _require(self.risk_rate >= 0, "risk_rate must be >= 0")


@dataclass(frozen=True)
class NetworkConfig:
    """A parallel-road network with one origin-destination pair."""

    roads: tuple[RoadSpec, ...]
    demand: float            # persons/minute entering the network
    taxi_risk_rate: float    # risk-units/minute inside any taxi
    rail: RailSpec | None = None
    walk: WalkSpec | None = None
    bpr_alpha: float = 0.15
    bpr_beta: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "roads", tuple(self.roads))
        _require(len(self.roads) >= 1, "at least one road is required")
        _require(self.demand > 0, "demand must be > 0")
        _require(self.taxi_risk_rate >= 0, "taxi_risk_rate must be >= 0")
        _require(self.bpr_alpha > 0, "bpr_alpha must be > 0")
        _require(self.bpr_beta > 0, "bpr_beta must be > 0")

    @property
    def n_roads(self) -> int:
        return len(self.roads)


@dataclass(frozen=True)
class FlowState:
    """Flows on every transport option, persons/minute.

    Conservation (sum of all flows == demand) is a solver responsibility and
    is deliberately not enforced here; entries for absent modes must be 0.
    """

    car_flows: np.ndarray   # (n_roads,)
    taxi_flows: np.ndarray  # (n_roads,)
    rail_flow: float = 0.0
    walk_flow: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "car_flows", np.asarray(self.car_flows, dtype=float))
        object.__setattr__(self, "taxi_flows", np.asarray(self.taxi_flows, dtype=float))
        _require(self.car_flows.shape == self.taxi_flows.shape, "car/taxi flow shapes differ")
        _require((self.car_flows >= 0).all(), "car flows must be >= 0")
        _require((self.taxi_flows >= 0).all(), "taxi flows must be >= 0")
        _require(self.rail_flow >= 0, "rail flow must be >= 0")
        _require(self.walk_flow >= 0, "walk flow must be >= 0")

    def total(self) -> float:
        return float(self.car_flows.sum() + self.taxi_flows.sum() + self.rail_flow + self.walk_flow)


def road_latency(road: RoadSpec, alpha: float, beta: float, vehicle_flow: float) -> float:
    """BPR volume-delay: a * (1 + alpha * (f/c)^beta) minutes.

    Strictly increasing in flow, equal to the free-flow latency at zero.
    """
    if vehicle_flow < 0:
        raise ValueError(f"vehicle flow must be >= 0, got {vehicle_flow}")
    return road.free_flow_latency * (1.0 + alpha * (vehicle_flow / road.capacity) ** beta)


def taxi_trip_risk(taxi_risk_rate: float, latency: float) -> float:
    """Infection risk of one taxi trip: rate times in-vehicle minutes."""
    if latency <= 0:
        raise ValueError(f"latency must be > 0, got {latency}")
    return taxi_risk_rate * latency


def rail_trip_risk(rail: RailSpec, rail_flow: float) -> float:
    """Per-person risk of one railway trip; scales linearly with crowding."""
    if rail_flow < 0:
        raise ValueError(f"rail flow must be >= 0, got {rail_flow}")
    return rail.latency * rail.full_capacity_risk_rate * rail_flow / rail.capacity


def walk_trip_risk(walk: WalkSpec) -> float:
    """Per-person risk of walking the whole path."""
    return walk.latency * walk.risk_rate


def _check_flows(config: NetworkConfig, flows: FlowState):
    _require(flows.car_flows.shape[0] == config.n_roads, "flow vector length != n_roads")
    if config.rail is None:
        _require(flows.rail_flow == 0.0, "rail flow on a network without a railway")
    if config.walk is None:
        _require(flows.walk_flow == 0.0, "walk flow on a network without a walking path")


def total_latency(config: NetworkConfig, flows: FlowState) -> float:
    """Aggregate latency per unit time (person-minutes/minute) over all modes."""
    _check_flows(config, flows)
    out = 0.0
    for i, road in enumerate(config.roads):
        vehicle_flow = flows.car_flows[i] + flows.taxi_flows[i]
        out += vehicle_flow * road_latency(road, config.bpr_alpha, config.bpr_beta, vehicle_flow)
    if config.rail is not None:
        out += flows.rail_flow * config.rail.latency
    if config.walk is not None:
        out += flows.walk_flow * config.walk.latency
    return out


def total_risk(config: NetworkConfig, flows: FlowState) -> float:
    """Aggregate infection risk per unit time over all modes.

    Private cars contribute nothing; taxis risk scales with congested
    latency; railway risk is quadratic in its flow; walking is linear.
    """
    _check_flows(config, flows)
    out = 0.0
    for i, road in enumerate(config.roads):
        vehicle_flow = flows.car_flows[i] + flows.taxi_flows[i]
        latency = road_latency(road, config.bpr_alpha, config.bpr_beta, vehicle_flow)
        out += flows.taxi_flows[i] * taxi_trip_risk(config.taxi_risk_rate, latency)
    if config.rail is not None:
        out += flows.rail_flow * rail_trip_risk(config.rail, flows.rail_flow)
    if config.walk is not None:
        out += flows.walk_flow * walk_trip_risk(config.walk)
    return out


# --- JSON schema -----------------------------------------------------------
#
# {
#   "roads": [{"free_flow_latency", "capacity", "car_cost", "min_taxi_fare"}, ...],
#   "rail":  {"latency", "capacity", "fare", "full_capacity_risk_rate"},   (optional)
#   "walk":  {"latency", "risk_rate"},                                     (optional)
#   "alpha": number, "beta": number,          (optional, default 0.15 / 4)
#   "taxi_risk_rate": number, "demand": number
# }

_ROAD_KEYS = ("free_flow_latency", "capacity", "car_cost", "min_taxi_fare")
_RAIL_KEYS = ("latency", "capacity", "fare", "full_capacity_risk_rate")
_WALK_KEYS = ("latency", "risk_rate")


class _Validator:
    def __init__(self, doc: _jsonloc.LocatedJson, source_name: str):
        self.doc = doc
        self.source = source_name
        self.problems: list[str] = []

    def complain(self, path: tuple, message: str):
        line = self.doc.line_of(path)
        where = ".".join(
            str(p) if isinstance(p, str) else f"[{p}]" for p in path
        ).replace(".[", "[") or "<root>"
        prefix = f"{self.source}:{line}: " if line is not None else f"{self.source}: "
        self.problems.append(f"{prefix}{where}: {message}")

    def number(self, obj: dict, path: tuple, key: str, minimum: float,
               exclusive: bool, required: bool = True) -> float | None:
        if key not in obj:
            if required:
                self.complain(path, f"missing required key {key!r}")
            return None
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.complain(path + (key,), f"{key!r} must be a number")
            return None
        value = float(value)
        if not math.isfinite(value):
            self.complain(path + (key,), f"{key!r} must be finite")
            return None
        if exclusive and value <= minimum:
            self.complain(path + (key,), f"{key!r} must be > {minimum} (got {value})")
            return None
        if not exclusive and value < minimum:
            self.complain(path + (key,), f"{key!r} must be >= {minimum} (got {value})")
            return None
        return value

    def object(self, obj: dict, path: tuple, allowed: tuple[str, ...]):
        for key in obj:
            if key not in allowed:
                self.complain(path + (key,), f"unknown key {key!r}")


def validate_network_text(text: str, source_name: str = "network.json") -> tuple[NetworkConfig | None, list[str]]:
    """Validate a network JSON document, collecting every violation.

    Returns (config, []) on success or (None, problems) where each problem
    message carries the source line of the offending node.
    """
    try:
        doc = _jsonloc.parse(text)
    except _jsonloc.JsonSyntaxError as err:
        return None, [f"{source_name}: {err}"]

    v = _Validator(doc, source_name)
    root = doc.value
    if not isinstance(root, dict):
        return None, [f"{source_name}: document root must be an object"]

    v.object(root, (), ("roads", "rail", "walk", "alpha", "beta", "taxi_risk_rate", "demand"))

    roads: list[RoadSpec] = []
    if "roads" not in root:
        v.complain((), "missing required key 'roads'")
    elif not isinstance(root["roads"], list) or not root["roads"]:
        v.complain(("roads",), "'roads' must be a non-empty array")
    else:
        for i, entry in enumerate(root["roads"]):
            path = ("roads", i)
            if not isinstance(entry, dict):
                v.complain(path, "road entry must be an object")
                continue
            v.object(entry, path, _ROAD_KEYS)
            a = v.number(entry, path, "free_flow_latency", 0, exclusive=True)
            c = v.number(entry, path, "capacity", 0, exclusive=True)
            xc = v.number(entry, path, "car_cost", 0, exclusive=False)
            xt = v.number(entry, path, "min_taxi_fare", 0, exclusive=False)
            if None not in (a, c, xc, xt):
                roads.append(RoadSpec(a, c, xc, xt))

    rail = None
    if "rail" in root and root["rail"] is not None:
        entry, path = root["rail"], ("rail",)
        if not isinstance(entry, dict):
            v.complain(path, "'rail' must be an object")
        else:
            v.object(entry, path, _RAIL_KEYS)
            lat = v.number(entry, path, "latency", 0, exclusive=True)
            cap = v.number(entry, path, "capacity", 0, exclusive=True)
            fare = v.number(entry, path, "fare", 0, exclusive=False)
            rr = v.number(entry, path, "full_capacity_risk_rate", 0, exclusive=False)
            if None not in (lat, cap, fare, rr):
                rail = RailSpec(lat, cap, fare, rr)

    walk = None
    if "walk" in root and root["walk"] is not None:
        entry, path = root["walk"], ("walk",)
        if not isinstance(entry, dict):
            v.complain(path, "'walk' must be an object")
        else:
            v.object(entry, path, _WALK_KEYS)
            lat = v.number(entry, path, "latency", 0, exclusive=True)
            rr = v.number(entry, path, "risk_rate", 0, exclusive=False)
            if None not in (lat, rr):
                walk = WalkSpec(lat, rr)

    alpha = v.number(root, (), "alpha", 0, exclusive=True, required=False)
    beta = v.number(root, (), "beta", 0, exclusive=True, required=False)
    taxi_risk = v.number(root, (), "taxi_risk_rate", 0, exclusive=False)
    demand = v.number(root, (), "demand", 0, exclusive=True)

    if v.problems:
        return None, v.problems
    return (
        NetworkConfig(
            roads=tuple(roads),
            demand=demand,
            taxi_risk_rate=taxi_risk,
            rail=rail,
            walk=walk,
            bpr_alpha=alpha if alpha is not None else 0.15,
            bpr_beta=beta if beta is not None else 4.0,
        ),
        [],
    )


def load_network(path: str | Path) -> NetworkConfig:
    """Load and validate a network config file; raises ConfigError listing
    every violation with its source line."""
    path = Path(path)
    config, problems = validate_network_text(path.read_text(), source_name=path.name)
    if config is None:
        raise ConfigError(problems)
    return config


def network_to_dict(config: NetworkConfig) -> dict:
    """Normalized JSON form (the inverse of load_network)."""
    out: dict = {
        "roads": [
            {
                "free_flow_latency": r.free_flow_latency,
                "capacity": r.capacity,
                "car_cost": r.car_cost,
                "min_taxi_fare": r.min_taxi_fare,
            }
            for r in config.roads
        ],
    }
    if config.rail is not None:
        out["rail"] = {
            "latency": config.rail.latency,
            "capacity": config.rail.capacity,
            "fare": config.rail.fare,
            "full_capacity_risk_rate": config.rail.full_capacity_risk_rate,
        }
    if config.walk is not None:
        out["walk"] = {"latency": config.walk.latency, "risk_rate": config.walk.risk_rate}
    out["alpha"] = config.bpr_alpha
    out["beta"] = config.bpr_beta
    out["taxi_risk_rate"] = config.taxi_risk_rate
    out["demand"] = config.demand
    return out


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
