"""Finite probability measures, conditioning, and motivated belief mixing.

A motivated agent holds the belief ``w * P_Z + (1 - w) * P``: the convex
combination of the objective belief ``P`` and the belief ``P_Z`` the agent
would like to hold. On a finite outcome set this mixture is the unique
minimizer of :func:`dissonance` over the probability simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

__all__ = [
    "BeliefError",
    "ZeroProbabilityEvent",
    "MismatchedOutcomeSpaces",
    "NotAbsolutelyContinuous",
    "FiniteMeasure",
    "check_weight",
    "bayes_condition",
    "motivated_mix",
    "dissonance",
]

NORMALIZATION_TOL = 1e-12


class BeliefError(ValueError):
    pass


class ZeroProbabilityEvent(BeliefError):
    """Conditioning event has probability zero; supply P_Z directly instead."""


class MismatchedOutcomeSpaces(BeliefError):
    pass


class NotAbsolutelyContinuous(BeliefError):
    pass


@dataclass(frozen=True)
class FiniteMeasure:
    """A probability distribution on an explicit, ordered, finite outcome set.

    Weights are validated and renormalized on construction so that they sum
    to one exactly up to rounding.
    """

    outcomes: tuple
    weights: tuple

    def __init__(self, outcomes: Iterable[Hashable], weights: Iterable[float]):
        outcomes = tuple(outcomes)
        weights = tuple(float(x) for x in weights)
        if len(outcomes) != len(weights):
            raise BeliefError("outcomes and weights differ in length")
        if not outcomes:
            raise BeliefError("empty outcome set")
        if len(set(outcomes)) != len(outcomes):
            raise BeliefError("outcome labels must be distinct")
        if any(not math.isfinite(x) or x < 0.0 for x in weights):
            raise BeliefError("weights must be finite and nonnegative")
        total = math.fsum(weights)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise BeliefError(f"weights sum to {total!r}, not 1")
        weights = tuple(x / total for x in weights)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, outcomes: Iterable[Hashable]) -> "FiniteMeasure":
        outcomes = tuple(outcomes)
        return cls(outcomes, [1.0 / len(outcomes)] * len(outcomes))

    @classmethod
    def point_mass(cls, outcomes: Iterable[Hashable], at: Hashable) -> "FiniteMeasure":
        outcomes = tuple(outcomes)
        return cls(outcomes, [1.0 if o == at else 0.0 for o in outcomes])

    @classmethod
    def from_mapping(cls, mapping: dict) -> "FiniteMeasure":
        return cls(mapping.keys(), mapping.values())

    def __len__(self) -> int:
        return len(self.outcomes)

    def __getitem__(self, outcome: Hashable) -> float:
        return self.weights[self.outcomes.index(outcome)]

    def prob(self, event: Iterable[Hashable]) -> float:
        event = set(event)
        return math.fsum(x for o, x in zip(self.outcomes, self.weights) if o in event)

    def as_dict(self) -> dict:
        return dict(zip(self.outcomes, self.weights))


def check_weight(w: float) -> float:
    """Validate a motivation weight in [0, 1]."""
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise BeliefError(f"motivation weight must lie in [0, 1], got {w!r}")
    return w


def _require_same_space(*measures: FiniteMeasure) -> None:
    first = measures[0].outcomes
    for m in measures[1:]:
        if m.outcomes != first:
            raise MismatchedOutcomeSpaces("measures are defined on different outcome lists")


def bayes_condition(P: FiniteMeasure, event: Iterable[Hashable]) -> FiniteMeasure:
    """Condition ``P`` on ``event``; outcomes outside the event get weight 0."""
    event = set(event)
    if not event:
        raise BeliefError("conditioning event is empty")
    unknown = event.difference(P.outcomes)
    if unknown:
        raise BeliefError(f"event contains unknown outcomes: {sorted(map(repr, unknown))}")
    mass = P.prob(event)
    if mass <= 0.0:
        raise ZeroProbabilityEvent("P(event) = 0")
    return FiniteMeasure(
        P.outcomes,
        [x / mass if o in event else 0.0 for o, x in zip(P.outcomes, P.weights)],
    )


def motivated_mix(P: FiniteMeasure, P_Z: FiniteMeasure, w: float) -> FiniteMeasure:
    """Return the motivated belief ``w * P_Z + (1 - w) * P``."""
    w = check_weight(w)
    _require_same_space(P, P_Z)
    if w == 0.0:
        return P
    if w == 1.0:
        return P_Z
    return FiniteMeasure(
        P.outcomes,
        [w * z + (1.0 - w) * x for x, z in zip(P.weights, P_Z.weights)],
    )


def dissonance(
    h: FiniteMeasure | Sequence[float],
    P: FiniteMeasure,
    P_Z: FiniteMeasure,
    w: float,
) -> float:
    """Weighted squared L2(Q) distance from ``h`` to ``P_Z`` and to ``P``.

    ``Q = P + P_Z`` is the dominating measure. Densities with respect to Q
    are ratios of point masses, so the objective reduces to::

        sum over Q(o) > 0 of [w (h - P_Z)^2 + (1 - w) (h - P)^2] / Q

    ``h`` may be a FiniteMeasure on the same outcomes or a raw weight
    sequence (used by the grid search, which visits points that are not
    exactly normalized after rounding).
    """
    w = check_weight(w)
    _require_same_space(P, P_Z)
    if isinstance(h, FiniteMeasure):
        _require_same_space(h, P)
        hw = h.weights
    else:
        hw = tuple(float(x) for x in h)
        if len(hw) != len(P):
            raise MismatchedOutcomeSpaces("h has the wrong length")
    terms = []
    for x, z, y in zip(P.weights, P_Z.weights, hw):
        q = x + z
        if q == 0.0:
            if y != 0.0:
                raise NotAbsolutelyContinuous("h puts mass where P + P_Z has none")
            continue
        terms.append((w * (y - z) ** 2 + (1.0 - w) * (y - x) ** 2) / q)
    return math.fsum(terms)
