"""Exact binomial tails in log space, and the KL-type tail bracket."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "InvalidBracket",
    "TailBracket",
    "log_binom_pmf",
    "log_lower_tail",
    "lower_tail",
    "upper_tail",
    "bernoulli_kl",
    "binomial_tail_bracket",
]


class InvalidBracket(ValueError):
    pass


class TailBracket(NamedTuple):
    lower: float
    upper: float
    log_lower: float
    log_upper: float
    alpha_lattice: float


def log_binom_pmf(n: int, p: float, ks) -> np.ndarray:
    """log Pr[X = k] for X ~ Binomial(n, p), vectorized over ``ks``."""
    ks = np.asarray(ks, dtype=float)
    if p <= 0.0 or p >= 1.0:
        # degenerate endpoints: point mass at 0 or n
        target = 0.0 if p <= 0.0 else float(n)
        return np.where(ks == target, 0.0, -np.inf)
    return (
        gammaln(n + 1.0)
        - gammaln(ks + 1.0)
        - gammaln(n - ks + 1.0)
        + ks * math.log(p)
        + (n - ks) * math.log1p(-p)
    )


def _sum_small_first(logs: np.ndarray) -> float:
    if logs.size == 0:
        return 0.0
    vals = np.exp(np.sort(logs))
    return math.fsum(vals.tolist())


def log_lower_tail(n: int, p: float, k: int) -> float:
    """log Pr[X <= k]."""
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    return float(logsumexp(log_binom_pmf(n, p, np.arange(0, k + 1))))


def lower_tail(n: int, p: float, k: int) -> float:
    """Pr[X <= k], summed term by term from the smallest term upward."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    return min(1.0, _sum_small_first(log_binom_pmf(n, p, np.arange(0, k + 1))))


def upper_tail(n: int, p: float, k: int) -> float:
    """Pr[X > k], summed term by term from the smallest term upward."""
    if k >= n:
        return 0.0
    if k < 0:
        return 1.0
    return min(1.0, _sum_small_first(log_binom_pmf(n, p, np.arange(k + 1, n + 1))))


def bernoulli_kl(a: float, p: float) -> float:
    """KL divergence between Bernoulli(a) and Bernoulli(p)."""
    total = 0.0
    if a > 0.0:
        total += a * math.log(a / p)
    if a < 1.0:
        total += (1.0 - a) * math.log((1.0 - a) / (1.0 - p))
    return total


def _c_alpha(alpha: float, r: float) -> float:
    return (1.0 + r * (1.0 + r) / (1.0 - r) ** 2) / (alpha * (1.0 - alpha))


def binomial_tail_bracket(n_trials: int, p: float, alpha: float) -> TailBracket:
    """Two-sided bracket on Pr[X <= alpha * n] for X ~ Binomial(n, p), alpha < p.

    With ``r = p(1 - alpha) / (alpha(1 - p)) > 1`` the bracket is::

        exp(-n KL(alpha || p)) / sqrt(2 pi alpha (1 - alpha) n)
            * [(1 - c(1/r) / n) / (1 - 1/r),  1 / (1 - 1/r)]

    The event ``X <= alpha n`` only depends on ``floor(alpha n)``, and the
    bracket is sharp only on the lattice, so ``alpha`` is first snapped down
    to ``floor(alpha n) / n`` (reported as ``alpha_lattice``). Log-space
    bounds are returned alongside the plain ones since both underflow for
    large ``n``; ``log_lower`` is ``-inf`` when the lower factor is not
    positive.
    """
    n = int(n_trials)
    if n < 1:
        raise InvalidBracket("n_trials must be at least 1")
    if not (0.0 < p < 1.0):
        raise InvalidBracket("p must lie in (0, 1)")
    if not (0.0 < alpha < p):
        raise InvalidBracket(f"need 0 < alpha < p, got alpha={alpha!r}, p={p!r}")
    k = math.floor(alpha * n + 1e-9)
    if k < 1:
        raise InvalidBracket("floor(alpha * n) must be at least 1")
    a = k / n
    r = p * (1.0 - a) / (a * (1.0 - p))
    log_main = -n * bernoulli_kl(a, p) - 0.5 * math.log(2.0 * math.pi * a * (1.0 - a) * n)
    log_upper = log_main - math.log1p(-1.0 / r)
    lower_factor = 1.0 - _c_alpha(a, 1.0 / r) / n
    log_lower = log_upper + math.log(lower_factor) if lower_factor > 0.0 else -math.inf
    return TailBracket(
        lower=math.exp(log_lower) if lower_factor > 0.0 else lower_factor * math.exp(log_upper),
        upper=math.exp(log_upper),
        log_lower=log_lower,
        log_upper=log_upper,
        alpha_lattice=a,
    )
