"""Synthetic users: simulated survey sessions, shipped populations, and the
active-vs-random learning benchmark.

Ground-truth preference vectors are drawn from the sign-constrained prior
(latency, cost and risk weights all <= 0; incoherent synthetic users with
positive risk affinity teach nothing), while posterior inference keeps the
plain uniform-ball prior. "post"-style users have their risk weight
dominate their latency weight, "pre"-style the reverse, mirroring how the
pandemic shifted real preferences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import seeding
from .choice import DEFAULT_SCALES, AttributeScales
from .learning import (
    ChainConfig,
    Posterior,
    Prior,
    QueryRanges,
    ResponseRecord,
    generate_query,
    sample_posterior,
    select_query,
    simulate_user,
    validation_accuracy,
)
from .population import Population, UserPreferences

STYLES = ("pre", "post", "ball")


def draw_true_omega(rng: np.random.Generator, style: str = "ball") -> np.ndarray:
    """One ground-truth preference vector, optionally style-shaped.

    Drawn from the sign-constrained prior (latency, cost, risk weights all
    penalties) so every synthetic user is a coherent chooser.
    """
    if style not in STYLES:
        raise ValueError(f"style must be one of {STYLES}")
    omega = Prior(constrain_signs=True).sample(rng, 1)[0]
    if style == "post" and abs(omega[0]) > abs(omega[2]):
        omega[0], omega[2] = omega[2], omega[0]
    elif style == "pre" and abs(omega[2]) > abs(omega[0]):
        omega[0], omega[2] = omega[2], omega[0]
    return omega


@dataclass(frozen=True)
class SessionProtocol:
    """Shared knobs for simulated elicitation sessions."""

    pool_size: int = 1000
    n_roads: int = 2
    ranges: QueryRanges = field(default_factory=QueryRanges)
    chain: ChainConfig = field(default_factory=ChainConfig)
    prior: Prior = field(default_factory=Prior)
    scales: AttributeScales = DEFAULT_SCALES


def simulate_active_session(
    omega_true,
    n_queries: int,
    seed: int,
    protocol: SessionProtocol = SessionProtocol(),
) -> tuple[list[ResponseRecord], Posterior]:
    """Run the active elicitation loop against a simulated user.

    Each round resamples the posterior from the answers so far, scores a
    fresh random candidate pool by information gain, asks the argmax query,
    and records the simulated choice. Returns the records and the posterior
    conditioned on all of them. Deterministic given ``seed``.
    """
    records: list[ResponseRecord] = []
    for k in range(n_queries):
        posterior = sample_posterior(
            records, prior=protocol.prior, chain=protocol.chain,
            seed=seeding.derived_seed(seed, seeding.CHAIN, k), scales=protocol.scales,
        )
        query = select_query(
            protocol.pool_size, seeding.rng_for(seed, seeding.POOL, k),
            posterior.samples, protocol.ranges, protocol.n_roads, protocol.scales,
        )
        choice = simulate_user(
            omega_true, query, seeding.rng_for(seed, seeding.ANSWER, k), protocol.scales
        )
        records.append(ResponseRecord(query, choice))
    final = sample_posterior(
        records, prior=protocol.prior, chain=protocol.chain,
        seed=seeding.derived_seed(seed, seeding.CHAIN, n_queries), scales=protocol.scales,
    )
    return records, final


def simulate_random_session(
    omega_true,
    n_queries: int,
    seed: int,
    protocol: SessionProtocol = SessionProtocol(),
) -> tuple[list[ResponseRecord], Posterior]:
    """Same user, same inference, but uniformly random queries."""
    records: list[ResponseRecord] = []
    for k in range(n_queries):
        query = generate_query(
            seeding.rng_for(seed, seeding.RANDOM_QUERY, k), protocol.ranges, protocol.n_roads
        )
        choice = simulate_user(
            omega_true, query, seeding.rng_for(seed, seeding.ANSWER, k), protocol.scales
        )
        records.append(ResponseRecord(query, choice))
    final = sample_posterior(
        records, prior=protocol.prior, chain=protocol.chain,
        seed=seeding.derived_seed(seed, seeding.RANDOM_CHAIN, n_queries),
        scales=protocol.scales,
    )
    return records, final


def holdout_records(
    omega_true,
    n_holdout: int,
    seed: int,
    protocol: SessionProtocol = SessionProtocol(),
) -> list[ResponseRecord]:
    records = []
    for k in range(n_holdout):
        query = generate_query(
            seeding.rng_for(seed, seeding.HOLDOUT, k), protocol.ranges, protocol.n_roads
        )
        choice = simulate_user(
            omega_true, query,
            seeding.rng_for(seed, seeding.HOLDOUT_ANSWER, k), protocol.scales,
        )
        records.append(ResponseRecord(query, choice))
    return records


def synthesize_population(
    n_users: int,
    n_car_owners: int,
    style: str,
    seed: int,
    n_active: int = 10,
    protocol: SessionProtocol = SessionProtocol(),
) -> Population:
    """A population of learned posteriors, produced by actually running the
    elicitation protocol on styled synthetic users (never by shortcutting
    to the ground truth)."""
    if not 0 <= n_car_owners <= n_users:
        raise ValueError("need 0 <= n_car_owners <= n_users")
    users = []
    for u in range(n_users):
        omega_true = draw_true_omega(seeding.rng_for(seed, seeding.TRUTH, u), style)
        _, posterior = simulate_active_session(
            omega_true, n_active, seeding.derived_seed(seed, seeding.TRUTH, u, 1), protocol
        )
        users.append(UserPreferences(
            samples=posterior.samples,
            car_owner=u < n_car_owners,
            label=f"{style}-user{u + 1:02d}",
        ))
    return Population(users=tuple(users), scales=protocol.scales)


@dataclass(frozen=True)
class UserBenchRow:
    user: int
    accuracy_active: float
    accuracy_random: float


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[UserBenchRow, ...]
    n_active: int
    n_holdout: int
    seed: int

    @property
    def mean_active(self) -> float:
        return float(np.mean([r.accuracy_active for r in self.rows]))

    @property
    def mean_random(self) -> float:
        return float(np.mean([r.accuracy_random for r in self.rows]))

    @property
    def p_value(self) -> float:
        """Paired one-sided t-test that active beats random."""
        active = np.array([r.accuracy_active for r in self.rows])
        random = np.array([r.accuracy_random for r in self.rows])
        if np.allclose(active, random):
            return 1.0
        return float(stats.ttest_rel(active, random, alternative="greater").pvalue)

    @property
    def chance_level(self) -> float:
        return 1.0 / 6.0


def run_learning_benchmark(
    n_users: int = 50,
    n_active: int = 10,
    n_holdout: int = 6,
    seed: int = 0,
    style: str = "ball",
    protocol: SessionProtocol = SessionProtocol(),
) -> BenchResult:
    """Paired active-vs-random elicitation benchmark on synthetic users.

    Each user answers n_active training queries under both policies (same
    simulated preferences, same holdout set) and both posteriors predict
    the same n_holdout random holdout answers. With n_active=0 both arms
    reduce to prior-only prediction, which lands at chance level.
    """
    if n_users < 1 or n_holdout < 1 or n_active < 0:
        raise ValueError("need n_users >= 1, n_holdout >= 1, n_active >= 0")
    rows = []
    for u in range(n_users):
        user_seed = seeding.derived_seed(seed, seeding.TRUTH, u, 2)
        omega_true = draw_true_omega(seeding.rng_for(seed, seeding.TRUTH, u), style)
        held_out = holdout_records(omega_true, n_holdout, user_seed, protocol)
        _, active_posterior = simulate_active_session(omega_true, n_active, user_seed, protocol)
        _, random_posterior = simulate_random_session(omega_true, n_active, user_seed, protocol)
        rows.append(UserBenchRow(
            user=u,
            accuracy_active=validation_accuracy(active_posterior, held_out, protocol.scales),
            accuracy_random=validation_accuracy(random_posterior, held_out, protocol.scales),
        ))
    return BenchResult(rows=tuple(rows), n_active=n_active, n_holdout=n_holdout, seed=seed)
