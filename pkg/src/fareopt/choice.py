"""Transport options, domination, the 7-weight linear utility, logit choice.

A preference vector ``omega`` is a plain float array of length 7:
indices 0..2 weight latency, monetary cost and infection risk (attributes
are divided by reference scales first, see AttributeScales); indices 3..6
are mode biases for car, taxi, rail, walk.

Dominated options (weakly worse than an available option of the same mode,
strictly worse in at least one attribute) receive choice probability
exactly 0; the railway and the walking path can never be dominated because
an option set contains at most one of each.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels

OMEGA_DIM = 7


class Mode(Enum):
    CAR = "car"
    TAXI = "taxi"
    RAIL = "rail"
    WALK = "walk"


# Kernel encoding; the mode bias of an option is omega[3 + mode_index].
MODE_INDEX = {Mode.CAR: 0, Mode.TAXI: 1, Mode.RAIL: 2, Mode.WALK: 3}


class _DominatedSentinel:
    """Utility value of a dominated option. Kept out of float arithmetic:
    the softmax never exponentiates it, it only marks exclusion."""

    __slots__ = ()

    def __repr__(self):
        return "DOMINATED"


DOMINATED = _DominatedSentinel()


class DegenerateOptionSetError(ValueError):
    """Every option in the set is dominated (cannot happen for sets built by
    this package; defends against hand-built availability masks)."""


@dataclass(frozen=True)
class AttributeScales:
    """Reference scales dividing raw attributes before the preference
    weights apply.

    Calibrated so that typical unit-ball preference vectors are decisive
    choosers (choice predictability comparable to what interactive studies
    report for humans, ~90%); at e.g. 10x larger scales even the true
    preference vector predicts barely above chance, which no amount of
    learning can recover."""

    latency: float = 6.0  # minutes
    cost: float = 2.0     # currency
    risk: float = 6.0     # risk-units

    def __post_init__(self):
        if min(self.latency, self.cost, self.risk) <= 0:
            raise ValueError("attribute scales must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.latency, self.cost, self.risk])


DEFAULT_SCALES = AttributeScales()


@dataclass(frozen=True)
class TransportOption:
    """One choice alternative: a mode plus its (latency, cost, risk)."""

    mode: Mode
    latency: float  # minutes
    cost: float     # currency
    risk: float     # risk-units per trip
    road_index: int | None = None  # set iff mode is CAR or TAXI

    def __post_init__(self):
        if not all(np.isfinite([self.latency, self.cost, self.risk])):
            raise ValueError("option attributes must be finite")
        if min(self.latency, self.cost, self.risk) < 0:
            raise ValueError("option attributes must be >= 0")
        on_road = self.mode in (Mode.CAR, Mode.TAXI)
        if on_road and self.road_index is None:
            raise ValueError(f"{self.mode.value} option needs a road_index")
        if not on_road and self.road_index is not None:
            raise ValueError(f"{self.mode.value} option cannot have a road_index")

    def attributes(self) -> np.ndarray:
        return np.array([self.latency, self.cost, self.risk])


@dataclass(frozen=True)
class OptionSet:
    """The options available to one user for one choice."""

    options: tuple[TransportOption, ...]

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise ValueError("option set must be non-empty")
        seen: set = set()
        for o in self.options:
            key = (o.mode, o.road_index)
            if key in seen:
                raise ValueError(f"duplicate option {o.mode.value} road={o.road_index}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.options)

    def attribute_matrix(self) -> np.ndarray:
        return np.array([[o.latency, o.cost, o.risk] for o in self.options])

    def mode_indices(self) -> np.ndarray:
        return np.array([MODE_INDEX[o.mode] for o in self.options], dtype=np.int64)


def validate_omega(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (OMEGA_DIM,):
        raise ValueError(f"preference vector must have shape ({OMEGA_DIM},)")
    if not np.isfinite(omega).all():
        raise ValueError("preference vector must be finite")
    return omega


def as_sample_matrix(samples) -> np.ndarray:
    """Coerce a Posterior, a single omega, or an (M, 7) array to (M, 7)."""
    samples = getattr(samples, "samples", samples)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != OMEGA_DIM:
        raise ValueError(f"samples must have {OMEGA_DIM} columns")
    return samples


def dominated_mask(option_set: OptionSet) -> np.ndarray:
    """Boolean mask over the option list, True where dominated."""
    attrs = option_set.attribute_matrix()
    modes = option_set.mode_indices()
    avail = np.ones(len(option_set), dtype=bool)
    return np.asarray(kernels.dominated_mask(attrs, modes, avail))


def dominated_set(option_set: OptionSet) -> tuple[TransportOption, ...]:
    """The dominated subset of an option set."""
    mask = dominated_mask(option_set)
    return tuple(o for o, d in zip(option_set.options, mask) if d)


def utility(omega, option: TransportOption, is_dominated: bool,
            scales: AttributeScales = DEFAULT_SCALES):
    """Linear utility of one option, or the DOMINATED sentinel.

    Attributes are normalized by ``scales`` before weighting.
    """
    if is_dominated:
        return DOMINATED
    omega = validate_omega(omega)
    normalized = option.attributes() / scales.as_array()
    return float(omega[:3] @ normalized + omega[3 + MODE_INDEX[option.mode]])


def choice_probabilities(omega, option_set: OptionSet,
                         scales: AttributeScales = DEFAULT_SCALES) -> np.ndarray:
    """Multinomial-logit choice probabilities over an option set.

    Dominated options get exactly 0; the rest are a numerically stable
    softmax of their utilities. The result sums to 1.
    """
    omega = validate_omega(omega)
    attrs = option_set.attribute_matrix() / scales.as_array()
    modes = option_set.mode_indices()
    avail = np.ones(len(option_set), dtype=bool)
    if bool(np.asarray(kernels.dominated_mask(attrs, modes, avail)).all()):
        raise DegenerateOptionSetError("every option in the set is dominated")
    probs = kernels.choice_prob_matrix(attrs, modes, avail, omega[None, :])
    return np.asarray(probs)[0]


def option_slot(option: TransportOption, n_roads: int) -> int:
    """Position of an option in the global share vector.

    Convention: [car road 1..n, taxi road 1..n, rail, walk], so the vector
    has length 2*n_roads + 2 whether or not rail/walk exist in a network.
    """
    if option.mode is Mode.CAR:
        slot = option.road_index
    elif option.mode is Mode.TAXI:
        slot = n_roads + option.road_index
    elif option.mode is Mode.RAIL:
        slot = 2 * n_roads
    else:
        slot = 2 * n_roads + 1
    if option.road_index is not None and not 0 <= option.road_index < n_roads:
        raise ValueError(f"road_index {option.road_index} out of range for n_roads={n_roads}")
    return slot


def population_shares(
    posteriors,
    option_sets: list[OptionSet],
    n_roads: int,
    scales: AttributeScales = DEFAULT_SCALES,
    weights=None,
) -> np.ndarray:
    """Population-level choice shares over the 2n+2 global options.

    Monte-Carlo estimate of the per-user integral of logit probabilities
    against each user's preference distribution: every user contributes the
    (weighted) average of their posterior samples' choice probabilities,
    mapped into global option slots; users lacking an option contribute
    zero to its entry. Entries sum to 1.

    posteriors: one (M_k, 7) sample array (or Posterior) per user.
    weights: optional per-user sample weights, normalized internally.
    """
    if len(posteriors) == 0:
        raise ValueError("population_shares needs at least one user")
    if len(posteriors) != len(option_sets):
        raise ValueError("posteriors and option_sets must align")
    n_users = len(posteriors)
    shares = np.zeros(2 * n_roads + 2)
    for k in range(n_users):
        samples = as_sample_matrix(posteriors[k])
        if samples.shape[0] == 0:
            raise ValueError(f"user {k} has an empty posterior")
        if weights is None:
            w = np.full(samples.shape[0], 1.0 / samples.shape[0])
        else:
            w = np.asarray(weights[k], dtype=float)
            if w.shape != (samples.shape[0],) or (w < 0).any() or w.sum() <= 0:
                raise ValueError(f"bad sample weights for user {k}")
            w = w / w.sum()
        option_set = option_sets[k]
        attrs = option_set.attribute_matrix() / scales.as_array()
        modes = option_set.mode_indices()
        avail = np.ones(len(option_set), dtype=bool)
        user_shares = kernels.shares_for_group(attrs, modes, avail, samples, w)
        for j, option in enumerate(option_set.options):
            shares[option_slot(option, n_roads)] += user_shares[j]
    return shares / n_users
