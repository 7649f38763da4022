"""Study populations: per-user preference posteriors plus option availability.

A population file is JSON:

    {"v": 1,
     "scales": {"latency": 60, "cost": 20, "risk": 60},      (optional)
     "users": [{"car_owner": true,
                "samples": [[w1..w7], ...],
                "label": "user01"}, ...]}

The attribute scales ride along because learned preference weights are only
meaningful together with the normalization they were learned under.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .choice import DEFAULT_SCALES, OMEGA_DIM, AttributeScales
from .network import ConfigError


@dataclass(frozen=True)
class UserPreferences:
    """One user's posterior sample matrix and their option availability."""

    samples: np.ndarray  # (M, 7)
    car_owner: bool
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] != OMEGA_DIM:
            raise ValueError("user samples must be a non-empty (M, 7) array")
        if not np.isfinite(samples).all():
            raise ValueError("user samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class Population:
    users: tuple[UserPreferences, ...]
    scales: AttributeScales = field(default_factory=AttributeScales)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not self.users:
            raise ValueError("population needs at least one user")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_car_owners(self) -> int:
        return sum(u.car_owner for u in self.users)


def population_to_dict(population: Population) -> dict:
    return {
        "v": 1,
        "scales": {
            "latency": population.scales.latency,
            "cost": population.scales.cost,
            "risk": population.scales.risk,
        },
        "users": [
            {
                "car_owner": user.car_owner,
                "label": user.label,
                "samples": user.samples.tolist(),
            }
            for user in population.users
        ],
    }


def save_population(population: Population, path: str | Path):
    Path(path).write_text(json.dumps(population_to_dict(population)) + "\n")


def population_from_dict(doc: dict, source_name: str = "population") -> Population:
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError([f"{source_name}: document root must be an object"])
    scales = DEFAULT_SCALES
    if "scales" in doc:
        s = doc["scales"]
        if not isinstance(s, dict) or not all(
            isinstance(s.get(k), (int, float)) and s.get(k) > 0
            for k in ("latency", "cost", "risk")
        ):
            problems.append(f"{source_name}: 'scales' must give positive latency/cost/risk")
        else:
            scales = AttributeScales(float(s["latency"]), float(s["cost"]), float(s["risk"]))
    users: list[UserPreferences] = []
    entries = doc.get("users")
    if not isinstance(entries, list) or not entries:
        problems.append(f"{source_name}: 'users' must be a non-empty array")
        entries = []
    for i, entry in enumerate(entries):
        where = f"{source_name}: users[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: must be an object")
            continue
        if not isinstance(entry.get("car_owner"), bool):
            problems.append(f"{where}: 'car_owner' must be a boolean")
            continue
        try:
            samples = np.asarray(entry.get("samples"), dtype=float)
            users.append(UserPreferences(
                samples=samples,
                car_owner=entry["car_owner"],
                label=str(entry.get("label", f"user{i + 1:02d}")),
            ))
        except (ValueError, TypeError) as err:
            problems.append(f"{where}: {err}")
    if problems:
        raise ConfigError(problems)
    return Population(users=tuple(users), scales=scales)


def load_population(path: str | Path) -> Population:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError([f"{path.name}: {err}"]) from err
    return population_from_dict(doc, source_name=path.name)
