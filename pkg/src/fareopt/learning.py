"""Bayesian inference of user preferences and information-gain querying.

The posterior over a user's 7-dim preference vector is the uniform
unit-ball prior times the logit likelihood of their recorded choices;
it is represented by Metropolis-Hastings samples. The next query is the
candidate (from a random pool) maximizing the sampled mutual information
between the preference vector and the user's answer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .choice import (
    DEFAULT_SCALES,
    AttributeScales,
    Mode,
    OptionSet,
    TransportOption,
    as_sample_matrix,
    choice_probabilities,
    dominated_mask,
    validate_omega,
)


@dataclass(frozen=True)
class Prior:
    """Uniform distribution over the 7-dim unit ball.

    ``constrain_signs`` optionally restricts support to omega_1..3 <= 0
    (all humans presumably dislike latency, cost and risk); off by default.
    """

    constrain_signs: bool = False

    def contains(self, omega) -> bool:
        omega = validate_omega(omega)
        if omega @ omega > 1.0:
            return False
        if self.constrain_signs and (omega[:3] > 0.0).any():
            return False
        return True

    def log_density(self, omega) -> float:
        return 0.0 if self.contains(omega) else -math.inf

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Exact draws: direction uniform on the sphere, radius ~ U^(1/7).

        Sign constraints fold the ball onto the omega_1..3 <= 0 orthant,
        which preserves uniformity by symmetry.
        """
        direction = rng.standard_normal((n, 7))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.random(n) ** (1.0 / 7.0)
        out = direction * radius[:, None]
        if self.constrain_signs:
            out[:, :3] = -np.abs(out[:, :3])
        return out


@dataclass(frozen=True)
class ResponseRecord:
    """One observed choice: the options shown and the index picked."""

    query: OptionSet
    chosen_index: int

    def __post_init__(self):
        if not 0 <= self.chosen_index < len(self.query):
            raise ValueError(f"chosen_index {self.chosen_index} out of range")
        if dominated_mask(self.query)[self.chosen_index]:
            raise ValueError("chosen option is dominated; the choice model cannot explain it")


@dataclass(frozen=True)
class ChainConfig:
    n_steps: int = 10000
    burn_in: int = 2000
    n_samples: int = 100
    proposal_sigma: float = 0.05

    def __post_init__(self):
        if self.n_steps <= 0 or self.burn_in < 0 or self.burn_in >= self.n_steps:
            raise ValueError("need 0 <= burn_in < n_steps")
        if not 1 <= self.n_samples <= self.n_steps - self.burn_in:
            raise ValueError("need 1 <= n_samples <= n_steps - burn_in")
        if self.proposal_sigma <= 0:
            raise ValueError("proposal_sigma must be > 0")

    @property
    def thin(self) -> int:
        return (self.n_steps - self.burn_in) // self.n_samples


@dataclass(frozen=True)
class Posterior:
    """MH samples of one user's preference distribution plus chain metadata."""

    samples: np.ndarray  # (M, 7)
    n_steps: int
    burn_in: int
    thin: int
    acceptance_rate: float
    seed: int | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] != 7:
            raise ValueError("posterior samples must be a non-empty (M, 7) array")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


def _dataset_arrays(dataset, scales: AttributeScales):
    """Pad a list of ResponseRecord into rectangular kernel inputs."""
    n_rec = len(dataset)
    max_opts = max((len(r.query) for r in dataset), default=1)
    attrs = np.zeros((n_rec, max_opts, 3))
    modes = np.zeros((n_rec, max_opts), dtype=np.int64)
    avail = np.zeros((n_rec, max_opts), dtype=bool)
    chosen = np.zeros(n_rec, dtype=np.int64)
    scale = scales.as_array()
    for r, record in enumerate(dataset):
        n_opt = len(record.query)
        attrs[r, :n_opt] = record.query.attribute_matrix() / scale
        modes[r, :n_opt] = record.query.mode_indices()
        avail[r, :n_opt] = True
        chosen[r] = record.chosen_index
    return attrs, modes, avail, chosen


def log_unnormalized_posterior(
    omega,
    dataset,
    prior: Prior = Prior(),
    scales: AttributeScales = DEFAULT_SCALES,
) -> float:
    """Log prior (0 or -inf) plus the log-likelihood of every record.

    Records are conditionally independent given omega, so the data term is
    a sum of log choice probabilities.
    """
    omega = validate_omega(omega)
    if not prior.contains(omega):
        return -math.inf
    total = 0.0
    for record in dataset:
        probs = choice_probabilities(omega, record.query, scales=scales)
        p = probs[record.chosen_index]
        total += math.log(p) if p > 0 else -math.inf
    return total


def sample_posterior(
    dataset,
    prior: Prior = Prior(),
    chain: ChainConfig = ChainConfig(),
    seed: int = 0,
    scales: AttributeScales = DEFAULT_SCALES,
) -> Posterior:
    """Random-walk Metropolis-Hastings over the preference posterior.

    Deterministic given ``seed``: every proposal and acceptance draw comes
    from one Generator stream. The chain starts at the origin (always in
    support), discards ``burn_in`` steps and keeps every ``thin``-th state.
    A pathological acceptance rate (<1%) triggers a warning, never a
    silent result.
    """
    attrs, modes, avail, chosen = _dataset_arrays(dataset, scales)
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((chain.n_steps, 7))
    log_unifs = np.log(rng.random(chain.n_steps))
    start = np.zeros(7)
    states, n_accept = kernels.mh_chain(
        attrs, modes, avail, chosen, prior.constrain_signs,
        start, chain.proposal_sigma, normals, log_unifs,
    )
    acceptance = n_accept / chain.n_steps
    if acceptance < 0.01:
        warnings.warn(
            f"MH acceptance rate {acceptance:.2%} is pathologically low; "
            "consider a smaller proposal_sigma",
            stacklevel=2,
        )
    keep = chain.burn_in + np.arange(chain.n_samples) * chain.thin
    return Posterior(
        samples=np.asarray(states)[keep].copy(),
        n_steps=chain.n_steps,
        burn_in=chain.burn_in,
        thin=chain.thin,
        acceptance_rate=acceptance,
        seed=seed,
    )


# --- active querying ---------------------------------------------------------


@dataclass(frozen=True)
class QueryRanges:
    """Attribute ranges for random candidate queries.

    Rail risk is drawn as an occupancy fraction of ``rail_full_risk`` (the
    per-trip risk of a 100% full train) so it renders naturally as a train
    density; other modes draw risk directly.
    """

    latency: tuple[float, float] = (10.0, 120.0)   # minutes
    cost: tuple[float, float] = (0.0, 30.0)        # currency
    risk: tuple[float, float] = (0.0, 350.0)       # risk-units
    rail_occupancy: tuple[float, float] = (0.0, 1.0)
    rail_full_risk: float = 350.0

    def __post_init__(self):
        for name in ("latency", "cost", "risk", "rail_occupancy"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"bad {name} range ({lo}, {hi})")
        if self.latency[0] <= 0:
            raise ValueError("latency lower bound must be > 0")
        if self.rail_full_risk <= 0:
            raise ValueError("rail_full_risk must be > 0")


@dataclass(frozen=True)
class QueryCandidatePool:
    queries: tuple[OptionSet, ...]
    ranges: QueryRanges = field(default_factory=QueryRanges)

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValueError("candidate pool must be non-empty")


def raw_query_batch(size: int, rng: np.random.Generator,
                    ranges: QueryRanges = QueryRanges(), n_roads: int = 2
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Random query attributes as arrays: (size, 2n+2, 3) plus mode codes.

    Option order per query: car per road, taxi per road, rail, walk. The
    hot query-selection path scores these directly; OptionSet wrappers are
    built only for winners.
    """
    if size < 1:
        raise ValueError("pool size must be >= 1")
    n_opt = 2 * n_roads + 2
    attrs = np.zeros((size, n_opt, 3))
    attrs[:, :, 0] = rng.uniform(*ranges.latency, (size, n_opt))
    attrs[:, :n_opt - 1, 1] = rng.uniform(*ranges.cost, (size, n_opt - 1))
    attrs[:, n_roads:2 * n_roads, 2] = rng.uniform(*ranges.risk, (size, n_roads))
    attrs[:, 2 * n_roads, 2] = (
        rng.uniform(*ranges.rail_occupancy, size) * ranges.rail_full_risk
    )
    attrs[:, 2 * n_roads + 1, 2] = rng.uniform(*ranges.risk, size)
    modes = np.concatenate([
        np.zeros(n_roads, dtype=np.int64),
        np.ones(n_roads, dtype=np.int64),
        [2, 3],
    ])
    return attrs, np.broadcast_to(modes, (size, n_opt)).copy()


def query_from_attributes(attrs: np.ndarray, n_roads: int = 2) -> OptionSet:
    """Wrap one (2n+2, 3) attribute block in an OptionSet."""
    options = []
    for road in range(n_roads):
        lat, cost, _ = attrs[road]
        options.append(TransportOption(Mode.CAR, lat, cost, 0.0, road_index=road))
    for road in range(n_roads):
        lat, cost, risk = attrs[n_roads + road]
        options.append(TransportOption(Mode.TAXI, lat, cost, risk, road_index=road))
    options.append(TransportOption(Mode.RAIL, *attrs[2 * n_roads]))
    options.append(TransportOption(Mode.WALK, *attrs[2 * n_roads + 1]))
    return OptionSet(tuple(options))


def generate_query(rng: np.random.Generator, ranges: QueryRanges = QueryRanges(),
                   n_roads: int = 2) -> OptionSet:
    """One random query: car+taxi per road, the railway, the walking path."""
    attrs, _ = raw_query_batch(1, rng, ranges, n_roads)
    return query_from_attributes(attrs[0], n_roads)


def generate_pool(size: int, rng: np.random.Generator,
                  ranges: QueryRanges = QueryRanges(), n_roads: int = 2) -> QueryCandidatePool:
    attrs, _ = raw_query_batch(size, rng, ranges, n_roads)
    return QueryCandidatePool(
        queries=tuple(query_from_attributes(attrs[c], n_roads) for c in range(size)),
        ranges=ranges,
    )


def _pool_arrays(queries, scales: AttributeScales):
    n_cand = len(queries)
    max_opts = max(len(q) for q in queries)
    attrs = np.zeros((n_cand, max_opts, 3))
    modes = np.zeros((n_cand, max_opts), dtype=np.int64)
    avail = np.zeros((n_cand, max_opts), dtype=bool)
    scale = scales.as_array()
    for c, query in enumerate(queries):
        n_opt = len(query)
        attrs[c, :n_opt] = query.attribute_matrix() / scale
        modes[c, :n_opt] = query.mode_indices()
        avail[c, :n_opt] = True
    return attrs, modes, avail


def info_gain_score(query: OptionSet, samples,
                    scales: AttributeScales = DEFAULT_SCALES) -> float:
    """Sampled mutual information between the preference vector and the
    answer to ``query``, in nats.

    Always in [0, log(#options)]; 0 for a single posterior sample (the
    answer then reveals nothing not already known) and for queries whose
    options all look identical.
    """
    samples = as_sample_matrix(samples)
    if samples.shape[0] == 0:
        raise ValueError("need at least one posterior sample")
    attrs, modes, avail = _pool_arrays([query], scales)
    return float(np.asarray(kernels.info_gain_scores(attrs, modes, avail, samples))[0])


def score_pool(pool: QueryCandidatePool, samples,
               scales: AttributeScales = DEFAULT_SCALES) -> np.ndarray:
    samples = as_sample_matrix(samples)
    if samples.shape[0] == 0:
        raise ValueError("need at least one posterior sample")
    attrs, modes, avail = _pool_arrays(pool.queries, scales)
    return np.asarray(kernels.info_gain_scores(attrs, modes, avail, samples))


def next_query(pool: QueryCandidatePool, samples,
               scales: AttributeScales = DEFAULT_SCALES) -> OptionSet:
    """The pool candidate with the highest information gain; ties break to
    the lowest pool index for determinism."""
    scores = score_pool(pool, samples, scales)
    return pool.queries[int(np.argmax(scores))]


def select_query(pool_size: int, rng: np.random.Generator, samples,
                 ranges: QueryRanges = QueryRanges(), n_roads: int = 2,
                 scales: AttributeScales = DEFAULT_SCALES) -> OptionSet:
    """generate_pool + next_query without materializing candidate objects;
    produces exactly the query those two would pick for the same rng."""
    samples = as_sample_matrix(samples)
    attrs, modes = raw_query_batch(pool_size, rng, ranges, n_roads)
    avail = np.ones(attrs.shape[:2], dtype=bool)
    scores = np.asarray(kernels.info_gain_scores(
        attrs / scales.as_array(), modes, avail, samples
    ))
    return query_from_attributes(attrs[int(np.argmax(scores))], n_roads)


def simulate_user(omega_true, query: OptionSet, seed,
                  scales: AttributeScales = DEFAULT_SCALES) -> int:
    """Sample a choice from the logit model of a known preference vector.

    ``seed`` may be an int or a Generator. Dominated options carry
    probability exactly 0 and are never returned.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = choice_probabilities(omega_true, query, scales=scales)
    return int(rng.choice(len(probs), p=probs))


def predict_choice(samples, query: OptionSet,
                   scales: AttributeScales = DEFAULT_SCALES) -> int:
    """Argmax of the posterior-mean choice probabilities."""
    samples = as_sample_matrix(samples)
    attrs = query.attribute_matrix() / scales.as_array()
    modes = query.mode_indices()
    avail = np.ones(len(query), dtype=bool)
    probs = np.asarray(kernels.choice_prob_matrix(attrs, modes, avail, samples))
    return int(np.argmax(probs.mean(axis=0)))


def validation_accuracy(posterior, held_out,
                        scales: AttributeScales = DEFAULT_SCALES) -> float:
    """Fraction of held-out records where the posterior-mean prediction
    matches the recorded choice."""
    if len(held_out) == 0:
        raise ValueError("held-out set must be non-empty")
    samples = as_sample_matrix(posterior)
    hits = sum(
        predict_choice(samples, record.query, scales) == record.chosen_index
        for record in held_out
    )
    return hits / len(held_out)
