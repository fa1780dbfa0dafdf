"""The motivated Condorcet jury model.

``2n + 1`` voters receive conditionally independent binary signals about a
binary state and vote by majority. Each voter's belief is a motivated mix
that leans toward the state their own signal indicates. The unique
type-symmetric responsive equilibrium is sincere voting below a population
threshold ``n_star`` and mixing by a-signal voters above it.

State ``A`` is the state with the (weakly) more accurate signal:
``1/2 < q_b <= q_a < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from .beliefs import check_weight
from .binomial import binomial_tail_bracket, lower_tail, upper_tail

__all__ = [
    "INDIFFERENCE_TOL",
    "CondorcetError",
    "DegenerateThreshold",
    "JuryParams",
    "JuryStrategy",
    "PivotalPair",
    "RateDiagnostic",
    "Response",
    "SINCERE",
    "psi",
    "n_star",
    "equilibrium",
    "pivotal_probs",
    "response_thresholds",
    "best_response",
    "effective_vote_prob",
    "limit_effective_vote_prob",
    "welfare_exact",
    "failure_prob",
    "rate_base",
    "rate_diagnostic_cjt",
    "binomial_tail_bracket",
]

INDIFFERENCE_TOL = 1e-9


class CondorcetError(ValueError):
    pass


class DegenerateThreshold(CondorcetError):
    """The upper response threshold is infinite (w = 1)."""


@dataclass(frozen=True)
class JuryParams:
    q_a: float
    q_b: float
    w: float = 0.0
    n: int = 1

    def __post_init__(self):
        check_weight(self.w)
        if not (0.5 < self.q_b <= self.q_a < 1.0):
            raise CondorcetError(
                f"need 1/2 < q_b <= q_a < 1, got q_a={self.q_a!r}, q_b={self.q_b!r}"
            )
        if int(self.n) != self.n or self.n < 0:
            raise CondorcetError(f"n must be a nonnegative integer, got {self.n!r}")

    @property
    def symmetric(self) -> bool:
        return self.q_a == self.q_b

    @property
    def n_voters(self) -> int:
        return 2 * self.n + 1

    def with_(self, **changes) -> "JuryParams":
        fields = dict(q_a=self.q_a, q_b=self.q_b, w=self.w, n=self.n)
        fields.update(changes)
        return JuryParams(**fields)


@dataclass(frozen=True)
class JuryStrategy:
    """Type-symmetric strategy: P(vote A | signal a), P(vote B | signal b)."""

    sigma_a: float
    sigma_b: float

    def __post_init__(self):
        for v in (self.sigma_a, self.sigma_b):
            if not 0.0 <= v <= 1.0:
                raise CondorcetError(f"strategy components must lie in [0, 1], got {v!r}")


SINCERE = JuryStrategy(1.0, 1.0)


class PivotalPair(NamedTuple):
    phi_a: float
    phi_b: float
    log_ratio: float

    @property
    def ratio(self) -> float:
        return math.exp(self.log_ratio)


@dataclass(frozen=True)
class RateDiagnostic:
    entries: tuple

    def __post_init__(self):
        ns = [n for n, _ in self.entries]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise CondorcetError("RateDiagnostic n values must be strictly increasing")

    @property
    def ns(self) -> list[int]:
        return [n for n, _ in self.entries]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.entries]

    def spread(self) -> float:
        """max / min over the sequence (inf if any entry is 0)."""
        vals = self.values
        lo = min(vals)
        return math.inf if lo <= 0.0 else max(vals) / lo

    def spread_about_median(self) -> float:
        vals = np.asarray(self.values)
        med = float(np.median(vals))
        if med <= 0.0 or vals.min() <= 0.0:
            return math.inf
        return float(max(vals.max() / med, med / vals.min()))


class Response(Enum):
    VOTE_A = "A"
    VOTE_B = "B"
    INDIFFERENT = "indifferent"


def psi(params: JuryParams) -> float:
    """Lower best-response threshold on the pivotal ratio phi_A / phi_B."""
    qa, qb, w = params.q_a, params.q_b, params.w
    return (1.0 - w) * (1.0 - qb) / (qa + w * (1.0 - qb))


def _pivot_ratio_sincere(params: JuryParams) -> float:
    return params.q_a * (1.0 - params.q_a) / (params.q_b * (1.0 - params.q_b))


def n_star(params: JuryParams) -> float:
    """Smallest n at which a-signal voters mix; ``math.inf`` if never.

    Returned as an int when finite.
    """
    if params.symmetric:
        return math.inf
    s = psi(params)
    if s <= 0.0:
        return math.inf
    arg = math.log(s) / math.log(_pivot_ratio_sincere(params))
    nearest = round(arg)
    if abs(arg - nearest) <= 1e-12:
        arg = float(nearest)
    return max(1, math.ceil(arg))


def _mixing_sigma_a(params: JuryParams, n: int) -> float:
    qa, qb = params.q_a, params.q_b
    x = psi(params) ** (1.0 / n)
    return (qa - x * (1.0 - qb)) / (qa * qa - x * (1.0 - qb) ** 2)


def equilibrium(params: JuryParams) -> JuryStrategy:
    """The unique type-symmetric responsive equilibrium for ``params.n``."""
    if params.n < 1:
        raise CondorcetError("equilibrium requires n >= 1")
    if params.n < n_star(params):
        return SINCERE
    sigma = _mixing_sigma_a(params, params.n)
    return JuryStrategy(min(1.0, max(0.0, sigma)), 1.0)


def _log_binom_central(n: int) -> float:
    return float(gammaln(2 * n + 1) - 2 * gammaln(n + 1))


def _xlogy(n: int, x: float) -> float:
    if x == 0.0:
        return 0.0 if n == 0 else -math.inf
    return n * math.log(x)


def pivotal_probs(params: JuryParams, strategy: JuryStrategy) -> PivotalPair:
    """Probability that the other 2n votes split n-n, conditional on each state."""
    n = params.n
    if n < 1:
        raise CondorcetError("pivotal probabilities require n >= 1")
    qa, qb = params.q_a, params.q_b
    sa, sb = strategy.sigma_a, strategy.sigma_b
    a_votes_in_a = qa * sa + (1.0 - qa) * (1.0 - sb)
    a_votes_in_b = (1.0 - qb) * sa + qb * (1.0 - sb)
    c = _log_binom_central(n)
    log_a = c + _xlogy(n, a_votes_in_a) + _xlogy(n, 1.0 - a_votes_in_a)
    log_b = c + _xlogy(n, a_votes_in_b) + _xlogy(n, 1.0 - a_votes_in_b)
    if math.isinf(log_a) and math.isinf(log_b):
        log_ratio = math.nan
    else:
        log_ratio = log_a - log_b
    return PivotalPair(math.exp(log_a), math.exp(log_b), log_ratio)


def response_thresholds(params: JuryParams) -> tuple[float, float]:
    """(t_lower, t_upper): a-signal voters weakly prefer A iff ratio >= t_lower,
    b-signal voters weakly prefer B iff ratio <= t_upper.

    Raises DegenerateThreshold at w = 1, where t_upper is infinite.
    """
    qa, qb, w = params.q_a, params.q_b, params.w
    if w == 1.0:
        raise DegenerateThreshold("t_upper is infinite at w = 1")
    return psi(params), (qb + w * (1.0 - qa)) / ((1.0 - w) * (1.0 - qa))


def best_response(params: JuryParams, strategy: JuryStrategy, signal: str) -> Response:
    """Best response of a voter with ``signal`` ('a' or 'b') to ``strategy``."""
    if signal not in ("a", "b"):
        raise CondorcetError(f"signal must be 'a' or 'b', got {signal!r}")
    ratio = pivotal_probs(params, strategy).ratio
    if math.isnan(ratio):
        raise CondorcetError("no vote is ever pivotal under this strategy")
    if params.w == 1.0:
        t_lower, t_upper = 0.0, math.inf
    else:
        t_lower, t_upper = response_thresholds(params)
    t = t_lower if signal == "a" else t_upper
    if math.isfinite(t) and abs(ratio - t) <= INDIFFERENCE_TOL:
        return Response.INDIFFERENT
    return Response.VOTE_A if ratio > t else Response.VOTE_B


def effective_vote_prob(params: JuryParams, strategy: JuryStrategy, state: str) -> float:
    """Ex ante probability that a random voter votes for the true ``state``."""
    qa, qb = params.q_a, params.q_b
    sa, sb = strategy.sigma_a, strategy.sigma_b
    if state == "A":
        return qa * sa + (1.0 - qa) * (1.0 - sb)
    if state == "B":
        return qb * sb + (1.0 - qb) * (1.0 - sa)
    raise CondorcetError(f"state must be 'A' or 'B', got {state!r}")


def limit_effective_vote_prob(params: JuryParams, state: str) -> float:
    """Effective vote probability under the limit equilibrium (n -> inf)."""
    if state not in ("A", "B"):
        raise CondorcetError(f"state must be 'A' or 'B', got {state!r}")
    if n_star(params) == math.inf:
        return params.q_a if state == "A" else params.q_b
    # sigma_a -> 1 / (1 + q_a - q_b); both states then share one value
    return params.q_a / (1.0 + params.q_a - params.q_b)


def _equilibrium_vote_prob(params: JuryParams, state: str) -> float:
    if params.n == 0:
        return effective_vote_prob(params, SINCERE, state)
    return effective_vote_prob(params, equilibrium(params), state)


def welfare_exact(params: JuryParams, state: str) -> float:
    """Probability the majority elects the true state at the equilibrium."""
    s = _equilibrium_vote_prob(params, state)
    return upper_tail(params.n_voters, s, params.n)


def failure_prob(params: JuryParams, state: str) -> float:
    """1 - welfare_exact, computed directly from the lower tail."""
    s = _equilibrium_vote_prob(params, state)
    return lower_tail(params.n_voters, s, params.n)


def rate_base(params: JuryParams, state: str) -> float:
    """Geometric base 4 s (1 - s) at the limit effective vote probability."""
    s = limit_effective_vote_prob(params, state)
    return 4.0 * s * (1.0 - s)


def rate_diagnostic_cjt(
    params_base: JuryParams,
    state: str,
    n_values: Sequence[int],
    failure: Callable[[JuryParams, str], float] | None = None,
) -> RateDiagnostic:
    """Sequence of (n, (1 - W_n) sqrt(n) / base^n).

    Boundedness of the sequence away from 0 and infinity certifies the
    exponential rate of welfare convergence. ``failure`` defaults to the
    exact lower tail; overriding it lets callers probe degenerate inputs.
    """
    failure = failure or failure_prob
    base = rate_base(params_base, state)
    entries = []
    for n in n_values:
        params = params_base.with_(n=int(n))
        miss = failure(params, state)
        if miss <= 0.0:
            entries.append((int(n), 0.0))
            continue
        log_val = math.log(miss) + 0.5 * math.log(n) - n * math.log(base)
        entries.append((int(n), math.exp(log_val)))
    return RateDiagnostic(tuple(entries))
