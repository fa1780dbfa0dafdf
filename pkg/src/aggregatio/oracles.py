"""Brute-force and Monte Carlo reference computations.

Nothing here calls the closed forms it is meant to check: jury welfare is
summed over every signal profile, learning welfare replays every signal
sequence agent by agent from Bayes' rule, hitting probabilities come from a
linear solve, and the belief minimizer from a simplex grid search.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .beliefs import FiniteMeasure, bayes_condition, check_weight, dissonance, motivated_mix
from .condorcet import JuryParams, JuryStrategy

__all__ = [
    "TooLarge",
    "McEstimate",
    "CJT_MAX_N",
    "SLM_MAX_N",
    "enumerate_cjt",
    "enumerate_pivotal",
    "motivated_pivot_comparison",
    "enumerate_slm",
    "SlmEnumeration",
    "mc_slm",
    "mc_cjt",
    "grid_minimize_dissonance",
    "absorption_linear_solve",
    "mixing_sigma_by_bisection",
    "smallest_mixing_n",
    "smallest_cascade_k",
    "posterior_by_enumeration",
    "stopping_pmf_by_enumeration",
    "shard_sizes",
    "thread_count",
]

CJT_MAX_N = 10
SLM_MAX_N = 20
GRID_MAX_OUTCOMES = 4


class TooLarge(ValueError):
    pass


# --- Condorcet enumeration -----------------------------------------------------


def _signal_profiles(m: int) -> np.ndarray:
    """All 2^m signal profiles as an (2^m, m) 0/1 array (1 = signal a)."""
    codes = np.arange(2**m, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(np.int8)


def _vote_count_distribution(n_a_signals: int, n_b_signals: int, sigma_a: float, sigma_b: float) -> np.ndarray:
    """Distribution of the number of A votes, built voter by voter."""
    dist = np.array([1.0])
    for prob_a in [sigma_a] * n_a_signals + [1.0 - sigma_b] * n_b_signals:
        nxt = np.zeros(dist.size + 1)
        nxt[:-1] += dist * (1.0 - prob_a)
        nxt[1:] += dist * prob_a
        dist = nxt
    return dist


def enumerate_cjt(params: JuryParams, strategy: JuryStrategy, state: str) -> float:
    """Exact probability that the majority elects ``state`` when it is true.

    Sums over all 2^(2n+1) signal profiles; within a profile the votes are
    independent draws from the strategy and the majority probability is
    obtained by convolving the individual vote laws.
    """
    n = params.n
    if n > CJT_MAX_N:
        raise TooLarge(f"enumeration capped at n <= {CJT_MAX_N}")
    if state not in ("A", "B"):
        raise ValueError(f"state must be 'A' or 'B', got {state!r}")
    m = 2 * n + 1
    # probability of an a-signal in this state
    p_sig_a = params.q_a if state == "A" else 1.0 - params.q_b
    profiles = _signal_profiles(m)
    per_voter = np.where(profiles == 1, p_sig_a, 1.0 - p_sig_a)
    profile_prob = per_voter.prod(axis=1)
    n_a = profiles.sum(axis=1)
    win = np.empty(m + 1)
    for j in range(m + 1):
        votes = _vote_count_distribution(j, m - j, strategy.sigma_a, strategy.sigma_b)
        a_wins = math.fsum(votes[n + 1:].tolist())
        win[j] = a_wins if state == "A" else 1.0 - a_wins
    return math.fsum((profile_prob * win[n_a]).tolist())


def enumerate_pivotal(params: JuryParams, strategy: JuryStrategy) -> tuple[float, float]:
    """(phi_A, phi_B): chance the other 2n votes tie, by profile enumeration."""
    n = params.n
    if n > CJT_MAX_N:
        raise TooLarge(f"enumeration capped at n <= {CJT_MAX_N}")
    m = 2 * n
    profiles = _signal_profiles(m)
    n_a = profiles.sum(axis=1)
    tie = np.array([
        _vote_count_distribution(j, m - j, strategy.sigma_a, strategy.sigma_b)[n]
        for j in range(m + 1)
    ])
    out = []
    for p_sig_a in (params.q_a, 1.0 - params.q_b):
        per_voter = np.where(profiles == 1, p_sig_a, 1.0 - p_sig_a)
        out.append(math.fsum((per_voter.prod(axis=1) * tie[n_a]).tolist()))
    return out[0], out[1]


def motivated_pivot_comparison(params: JuryParams, strategy: JuryStrategy, signal: str) -> tuple[float, float]:
    """Motivated probabilities of (pivotal and A true, pivotal and B true).

    Builds the objective joint law of (state, own signal, pivotal?) by
    enumeration, conditions it on the own signal and on (signal, matching
    state), and mixes the two with weight ``w``. Voting A is weakly
    preferred iff the first number is at least the second.
    """
    phi_a, phi_b = enumerate_pivotal(params, strategy)
    qa, qb = params.q_a, params.q_b
    joint = {}
    for state, phi in (("A", phi_a), ("B", phi_b)):
        p_a = qa if state == "A" else 1.0 - qb
        for s, ps in (("a", p_a), ("b", 1.0 - p_a)):
            for piv, pp in ((1, phi), (0, 1.0 - phi)):
                joint[(state, s, piv)] = 0.5 * ps * pp
    P = FiniteMeasure.from_mapping(joint)
    own = [o for o in P.outcomes if o[1] == signal]
    motive = "A" if signal == "a" else "B"
    P_s = bayes_condition(P, own)
    P_z = bayes_condition(P, [o for o in own if o[0] == motive])
    hat = motivated_mix(P_s, P_z, params.w)
    return hat.prob([("A", signal, 1)]), hat.prob([("B", signal, 1)])


def mixing_sigma_by_bisection(params: JuryParams, tol: float = 1e-14) -> float | None:
    """Solve phi_A / phi_B = t_lower for sigma_a (sigma_b = 1) by bisection.

    Returns None when the ratio stays above the threshold on all of (0, 1],
    i.e. sincere voting leaves a-signal voters strictly willing to vote A.
    """
    from .condorcet import pivotal_probs, psi

    target = math.log(psi(params))

    def gap(sigma):
        return pivotal_probs(params, JuryStrategy(sigma, 1.0)).log_ratio - target

    hi = 1.0
    if gap(hi) > 0.0:
        return None
    lo = 1e-12
    if gap(lo) < 0.0:
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def smallest_mixing_n(params: JuryParams, n_max: int = 10_000) -> float:
    """Smallest n at which the mixing probability lies in [0, 1]."""
    if params.q_a == params.q_b:
        return math.inf
    from .condorcet import psi

    s = psi(params)
    if s <= 0.0:
        return math.inf
    qa, qb = params.q_a, params.q_b
    for n in range(1, n_max + 1):
        x = s ** (1.0 / n)
        sigma = (qa - x * (1.0 - qb)) / (qa * qa - x * (1.0 - qb) ** 2)
        if 0.0 <= sigma <= 1.0 + 1e-12:
            return n
    return math.inf


# --- social learning enumeration -----------------------------------------------


class SlmEnumeration(NamedTuple):
    welfare: float
    cascade_up: float
    cascade_down: float


def _bayes_posterior_a(p: float, lead: np.ndarray, own: np.ndarray) -> np.ndarray:
    """Bayes probability that A is better given revealed lead and own signal (+1/-1)."""
    total = (lead + own).astype(float)
    like_a = p ** np.maximum(total, 0) * (1 - p) ** np.maximum(-total, 0)
    like_b = (1 - p) ** np.maximum(total, 0) * p ** np.maximum(-total, 0)
    return like_a / (like_a + like_b)


def _choices(p: float, w: float, lead: np.ndarray, own: np.ndarray) -> np.ndarray:
    """+1 for A, -1 for B; the agent follows the signal when indifferent."""
    motive = np.where(own > 0, 1.0, 0.0)
    belief_a = w * motive + (1.0 - w) * _bayes_posterior_a(p, lead, own)
    prefer_a = belief_a > 0.5
    prefer_b = belief_a < 0.5
    return np.where(prefer_a, 1, np.where(prefer_b, -1, own))


def _replay(p: float, w: float, signals: np.ndarray):
    """Replay the agents on a batch of signal sequences (+1 = a, -1 = b).

    The public lead moves only on informative actions, i.e. when the two
    possible signals would lead to different choices. Returns the number of
    A choices per sequence and the cascade direction reached (+1, -1, or 0).
    """
    batch, n = signals.shape
    leads = np.arange(-n - 1, n + 2)
    with_a = _choices(p, w, leads, np.ones_like(leads))
    with_b = _choices(p, w, leads, -np.ones_like(leads))
    offset = n + 1
    lead = np.zeros(batch, dtype=np.int64)
    correct = np.zeros(batch)
    for t in range(n):
        own = signals[:, t]
        ca, cb = with_a[lead + offset], with_b[lead + offset]
        correct += np.where(own > 0, ca, cb) > 0
        lead = np.where(ca != cb, lead + own, lead)
    ca, cb = with_a[lead + offset], with_b[lead + offset]
    cascade = np.where(ca == cb, ca, 0).astype(np.int8)
    return correct, cascade


def enumerate_slm(p: float, w: float, n: int) -> SlmEnumeration:
    """Exact welfare and cascade probabilities over all 2^n signal sequences (A better)."""
    check_weight(w)
    if n > SLM_MAX_N:
        raise TooLarge(f"enumeration capped at n <= {SLM_MAX_N}")
    if n < 1:
        raise ValueError("n must be positive")
    bits = _signal_profiles(n)
    signals = np.where(bits == 1, 1, -1).astype(np.int64)
    n_a = bits.sum(axis=1)
    prob = p ** n_a * (1.0 - p) ** (n - n_a)
    correct, cascade = _replay(p, w, signals)
    return SlmEnumeration(
        welfare=math.fsum((prob * correct).tolist()) / n,
        cascade_up=math.fsum(prob[cascade == 1].tolist()),
        cascade_down=math.fsum(prob[cascade == -1].tolist()),
    )


def smallest_cascade_k(p: float, w: float, k_limit: int = 10_000) -> float:
    """Smallest k >= 2 at which an a-signal agent facing lead -k chooses B."""
    for k in range(2, k_limit + 1):
        c = _choices(p, w, np.array([-k]), np.array([1]))[0]
        if c < 0:
            return k
    return math.inf


def posterior_by_enumeration(p: float, w: float, k: int, signal: str) -> float:
    """Motivated probability of A from a joint measure over states and histories.

    The joint law covers the state, every signal history of length ``|k| + 2``,
    and the agent's own signal. It is conditioned on net lead ``k`` and the
    own signal, then mixed with a point mass on the state the signal favors.
    """
    check_weight(w)
    if signal not in ("a", "b"):
        raise ValueError(f"signal must be 'a' or 'b', got {signal!r}")
    length = abs(int(k)) + 2
    outcomes, weights = [], []
    for state in ("A", "B"):
        q = p if state == "A" else 1.0 - p  # chance of an a signal
        for hist in itertools.product((1, -1), repeat=length):
            n_a = hist.count(1)
            base = 0.5 * q**n_a * (1.0 - q) ** (length - n_a)
            for own in ("a", "b"):
                outcomes.append((state, hist, own))
                weights.append(base * (q if own == "a" else 1.0 - q))
    joint = FiniteMeasure(outcomes, weights)
    event = [o for o in outcomes if sum(o[1]) == k and o[2] == signal]
    post = bayes_condition(joint, event)
    marginal = FiniteMeasure(("A", "B"), (post.prob(o for o in event if o[0] == "A"),
                                          post.prob(o for o in event if o[0] == "B")))
    motive = FiniteMeasure.point_mass(("A", "B"), "A" if signal == "a" else "B")
    return motivated_mix(marginal, motive, w)["A"]


def stopping_pmf_by_enumeration(p: float, k_star: int, n_max: int) -> dict:
    """{n: Pr[public lead first reaches +-k_star at agent n]} over all signal sequences."""
    if n_max > SLM_MAX_N:
        raise TooLarge(f"enumeration capped at n <= {SLM_MAX_N}")
    bits = _signal_profiles(n_max)
    steps = np.where(bits == 1, 1, -1)
    n_a = bits.sum(axis=1)
    prob = p**n_a * (1.0 - p) ** (n_max - n_a)
    hit = np.abs(np.cumsum(steps, axis=1)) >= k_star
    first = np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, 0)
    return {n: math.fsum(prob[first == n].tolist()) for n in range(1, n_max + 1)}


# --- Monte Carlo --------------------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_se * self.std_error


def thread_count(default: int = 1) -> int:
    """Worker cap from AGGREGATIO_THREADS (positive integer)."""
    raw = os.environ.get("AGGREGATIO_THREADS")
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"AGGREGATIO_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"AGGREGATIO_THREADS must be a positive integer, got {raw!r}")
    return value


def shard_sizes(n_samples: int, shards: int) -> list[int]:
    base, extra = divmod(n_samples, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _shard_rng(seed: int, shard: int) -> np.random.Generator:
    # Philox is counter based; each shard gets its own key from (seed, shard)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, shard])))


def _run_sharded(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    n_samples: int,
    seed: int,
    shards: int,
    threads: int | None,
) -> McEstimate:
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if shards < 1:
        raise ValueError("shards must be positive")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    sizes = shard_sizes(n_samples, shards)
    threads = threads or thread_count()

    def work(i):
        if sizes[i] == 0:
            return np.empty(0)
        return draw(_shard_rng(seed, i), sizes[i])

    if threads > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(shards)))
    else:
        parts = [work(i) for i in range(shards)]
    values = np.concatenate(parts)
    mean = math.fsum(values.tolist()) / n_samples
    if n_samples > 1:
        var = math.fsum(((values - mean) ** 2).tolist()) / (n_samples - 1)
        se = math.sqrt(var / n_samples)
    else:
        se = 0.0
    return McEstimate(mean=mean, std_error=se, n_samples=n_samples, seed=seed)


def _simulate_slm(p: float, w: float, n: int, rng: np.random.Generator, size: int, chunk: int = 20_000) -> np.ndarray:
    out = []
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        signals = np.where(rng.random((m, n)) < p, 1, -1).astype(np.int64)
        correct, _ = _replay(p, w, signals)
        out.append(correct / n)
    return np.concatenate(out)


def mc_slm(p: float, w: float, n: int, n_samples: int, seed: int, shards: int = 1,
           threads: int | None = None) -> McEstimate:
    """Monte Carlo fraction of agents choosing the better option."""
    check_weight(w)
    return _run_sharded(lambda rng, m: _simulate_slm(p, w, n, rng, m), n_samples, seed, shards, threads)


def _simulate_cjt(params: JuryParams, strategy: JuryStrategy, state: str, rng: np.random.Generator, size: int) -> np.ndarray:
    m = params.n_voters
    p_sig_a = params.q_a if state == "A" else 1.0 - params.q_b
    sig_a = rng.random((size, m)) < p_sig_a
    u = rng.random((size, m))
    vote_a = np.where(sig_a, u < strategy.sigma_a, u >= strategy.sigma_b)
    a_wins = vote_a.sum(axis=1) > params.n
    return (a_wins if state == "A" else ~a_wins).astype(float)


def mc_cjt(params: JuryParams, strategy: JuryStrategy, state: str, n_samples: int, seed: int,
           shards: int = 1, threads: int | None = None) -> McEstimate:
    """Monte Carlo probability that the majority elects the true ``state``."""
    if state not in ("A", "B"):
        raise ValueError(f"state must be 'A' or 'B', got {state!r}")
    return _run_sharded(lambda rng, m: _simulate_cjt(params, strategy, state, rng, m),
                        n_samples, seed, shards, threads)


# --- beliefs ------------------------------------------------------------------


def _simplex_grid(dim: int, steps: int):
    for head in itertools.product(range(steps + 1), repeat=dim - 1):
        rest = steps - sum(head)
        if rest >= 0:
            yield head + (rest,)


def grid_minimize_dissonance(P: FiniteMeasure, P_Z: FiniteMeasure, w: float,
                             resolution: float = 0.01) -> FiniteMeasure:
    """Exhaustive search for the dissonance minimizer over a simplex grid.

    Grid points that put mass where ``P + P_Z`` has none are skipped.
    """
    if len(P) > GRID_MAX_OUTCOMES:
        raise TooLarge(f"grid search capped at {GRID_MAX_OUTCOMES} outcomes")
    if not 0.0 < resolution <= 0.01:
        raise ValueError("resolution must lie in (0, 0.01]")
    steps = round(1.0 / resolution)
    if abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError("resolution must divide 1")
    support = np.array([x + z > 0.0 for x, z in zip(P.weights, P_Z.weights)])
    # vectorized objective on the full grid
    pts = np.array(list(_simplex_grid(len(P), steps)), dtype=float) / steps
    pts = pts[~(pts[:, ~support] > 0).any(axis=1)]
    px = np.asarray(P.weights)[support]
    pz = np.asarray(P_Z.weights)[support]
    h = pts[:, support]
    obj = ((w * (h - pz) ** 2 + (1.0 - w) * (h - px) ** 2) / (px + pz)).sum(axis=1)
    best = pts[int(np.argmin(obj))]
    # re-score the winner with the library objective as a consistency guard
    dissonance(best, P, P_Z, w)
    return FiniteMeasure(P.outcomes, best / best.sum())


# --- absorbing walk -------------------------------------------------------------


def absorption_linear_solve(p: float, k_star: int) -> tuple[float, float]:
    """(Pr[hit +k before -k], E[hitting time]) from first-step analysis.

    Unknowns are the interior states -k+1..k-1; both systems share the
    matrix ``I - Q`` of the substochastic interior transitions.
    """
    k = int(k_star)
    if k < 2:
        raise ValueError("k_star must be at least 2")
    size = 2 * k - 1
    A = np.eye(size)
    b_up = np.zeros(size)
    for i in range(size):
        state = i - (k - 1)
        if state + 1 == k:
            b_up[i] += p
        else:
            A[i, i + 1] -= p
        if state - 1 != -k:
            A[i, i - 1] -= 1.0 - p
    up = np.linalg.solve(A, b_up)
    time = np.linalg.solve(A, np.ones(size))
    return float(up[k - 1]), float(time[k - 1])
