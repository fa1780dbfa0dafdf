"""Motivated sequential social learning with binary signals.

Agents choose between two options in sequence. Each sees the actions of
everyone before them plus a private signal of accuracy ``p``, forms a
motivated belief that leans toward their own signal, and follows the signal
whenever indifferent. The public state is the net count ``k`` of revealed
signals; once ``|k|`` reaches the cascade threshold ``k_star`` every later
agent ignores their signal.

Throughout, the better option is ``A`` (up-steps have probability ``p``);
results for ``B`` follow by symmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .beliefs import check_weight

__all__ = [
    "INFINITE",
    "LearningError",
    "KMaxTooSmall",
    "ReconstructionFailure",
    "Choice",
    "LearningParams",
    "WalkDistribution",
    "SpectralData",
    "OptimalW",
    "cascade_threshold",
    "motivated_posterior",
    "decision",
    "absorption_prob",
    "walk_init",
    "walk_step",
    "walk_run",
    "welfare_infinite",
    "welfare_finite_exact",
    "welfare_at_threshold",
    "welfare_finite_decomposition",
    "welfare_w4_closed_form",
    "w_interval_for_threshold",
    "default_k_max",
    "welfare_by_threshold",
    "optimal_w",
    "transition_matrix",
    "spectral_decomposition",
    "stopping_time_tail",
    "stopping_time_tail_spectral",
    "stopping_time_pmf",
    "expected_stopping_time",
]

INFINITE = math.inf
FLOOR_SNAP = 1e-12
MASS_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-8


class LearningError(ValueError):
    pass


class KMaxTooSmall(LearningError):
    pass


class ReconstructionFailure(LearningError):
    """Closed-form eigenvectors do not reproduce the transition matrix."""

    def __init__(self, message: str, residual: float, numerical: "SpectralData | None" = None):
        super().__init__(message)
        self.residual = residual
        self.numerical = numerical


class Choice(Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class LearningParams:
    p: float
    w: float = 0.0
    n: int | None = None

    def __post_init__(self):
        _check_p(self.p)
        check_weight(self.w)
        if self.n is not None and (int(self.n) != self.n or self.n < 1):
            raise LearningError(f"population size must be a positive integer, got {self.n!r}")

    @property
    def k_star(self) -> float:
        return cascade_threshold(self.p, self.w)


def _check_p(p: float) -> float:
    if not 0.5 < p < 1.0:
        raise LearningError(f"signal accuracy must lie in (1/2, 1), got {p!r}")
    return float(p)


def _check_k_star(k_star) -> int:
    if k_star == INFINITE or int(k_star) != k_star or k_star < 2:
        raise LearningError(f"finite cascade threshold >= 2 required, got {k_star!r}")
    return int(k_star)


def _log_odds(p: float) -> float:
    return math.log(p) - math.log1p(-p)


# --- thresholds and decisions ----------------------------------------------


def cascade_threshold(p: float, w: float):
    """Net public lead at which even a contrary signal is overridden.

    Returns an int >= 2, or ``INFINITE`` when ``w >= 1/2``. Arguments of the
    floor within 1e-12 of an integer are snapped to it: at that boundary the
    agent is exactly indifferent and follows the signal.
    """
    p = _check_p(p)
    w = check_weight(w)
    if w >= 0.5:
        return INFINITE
    arg = -math.log1p(-2.0 * w) / _log_odds(p)
    nearest = round(arg)
    if abs(arg - nearest) <= FLOOR_SNAP:
        arg = float(nearest)
    return math.floor(arg) + 2


def motivated_posterior(p: float, w: float, k: int, signal: str) -> float:
    """Motivated probability that A is better, given public lead ``k`` and ``signal``."""
    p = _check_p(p)
    w = check_weight(w)
    if signal == "a":
        shift, motive = 1, 1.0
    elif signal == "b":
        shift, motive = -1, 0.0
    else:
        raise LearningError(f"signal must be 'a' or 'b', got {signal!r}")
    # 1 / (1 + ((1-p)/p)^m) written as a logistic in the log odds
    bayes = 1.0 / (1.0 + math.exp(-(k + shift) * _log_odds(p)))
    return w * motive + (1.0 - w) * bayes


def decision(p: float, w: float, k: int, signal: str) -> Choice:
    """Choice of an agent who sees lead ``k`` and ``signal``; ties follow the signal.

    The cascade boundary is taken from :func:`cascade_threshold` so that an
    agent exactly at the indifference point is never misclassified by
    rounding in the posterior.
    """
    k_star = cascade_threshold(p, w)
    if k_star != INFINITE and abs(k) > k_star:
        raise LearningError(f"|k| = {abs(k)} exceeds the cascade threshold {k_star}")
    if signal == "a":
        return Choice.B if k <= -k_star else Choice.A
    if signal == "b":
        return Choice.A if k >= k_star else Choice.B
    raise LearningError(f"signal must be 'a' or 'b', got {signal!r}")


def absorption_prob(p: float, k_star) -> float:
    """Probability the walk started at 0 hits +k_star before -k_star."""
    p = _check_p(p)
    k = _check_k_star(k_star)
    # p^k / (p^k + (1-p)^k) as a logistic in k times the log odds
    return 1.0 / (1.0 + math.exp(-k * _log_odds(p)))


# --- the walk over public leads -----------------------------------------------


@dataclass(frozen=True)
class WalkDistribution:
    """Law of the public lead after ``step`` agents, given that A is better.

    ``mass[i]`` is the probability of being at interior state ``i - k_star``
    (only states with the parity of ``step`` carry mass). ``expected_correct``
    accumulates the expected number of agents so far who chose A.
    """

    k_star: int
    p: float
    mass: np.ndarray = field(repr=False)
    absorbed_plus: float = 0.0
    absorbed_minus: float = 0.0
    expected_correct: float = 0.0
    step: int = 0

    def __post_init__(self):
        if self.mass.shape != (2 * self.k_star + 1,):
            raise LearningError("mass vector has the wrong length")
        self.mass.setflags(write=False)

    @property
    def states(self) -> np.ndarray:
        return np.arange(-self.k_star, self.k_star + 1)

    @property
    def interior_mass(self) -> float:
        return math.fsum(self.mass.tolist())

    @property
    def total_mass(self) -> float:
        return math.fsum([self.interior_mass, self.absorbed_plus, self.absorbed_minus])

    def at(self, k: int) -> float:
        if abs(k) >= self.k_star:
            return self.absorbed_plus if k >= self.k_star else self.absorbed_minus
        return float(self.mass[k + self.k_star])


def walk_init(p: float, k_star) -> WalkDistribution:
    k = _check_k_star(k_star)
    mass = np.zeros(2 * k + 1)
    mass[k] = 1.0
    return WalkDistribution(k_star=k, p=_check_p(p), mass=mass)


def walk_step(dist: WalkDistribution) -> WalkDistribution:
    """Process one more agent.

    Agents at an interior lead follow their signal (correct with
    probability p); agents after an up-cascade all choose A.
    """
    k, p = dist.k_star, dist.p
    interior = dist.interior_mass
    new = np.zeros_like(dist.mass)
    new[1:] += p * dist.mass[:-1]
    new[:-1] += (1.0 - p) * dist.mass[1:]
    # mass arriving at the ends is absorbed
    hit_plus, hit_minus = float(new[-1]), float(new[0])
    new[0] = new[-1] = 0.0
    return replace(
        dist,
        mass=new,
        absorbed_plus=dist.absorbed_plus + hit_plus,
        absorbed_minus=dist.absorbed_minus + hit_minus,
        expected_correct=dist.expected_correct + p * interior + dist.absorbed_plus,
        step=dist.step + 1,
    )


def walk_run(p: float, k_star, n: int) -> WalkDistribution:
    dist = walk_init(p, k_star)
    for _ in range(n):
        dist = walk_step(dist)
    return dist


def _walk_welfare_sequence(p: float, k_star: int, n_max: int) -> np.ndarray:
    """Array W[n] = expected fraction correct among the first n agents, n = 1..n_max.

    Same recursion as :func:`walk_step`, kept in raw arrays for long runs.
    """
    k = k_star
    mass = np.zeros(2 * k + 1)
    mass[k] = 1.0
    plus = 0.0
    correct = 0.0
    out = np.empty(n_max + 1)
    out[0] = math.nan
    q = 1.0 - p
    for n in range(1, n_max + 1):
        correct += p * mass.sum() + plus
        new = np.zeros_like(mass)
        new[1:] += p * mass[:-1]
        new[:-1] += q * mass[1:]
        plus += new[-1]
        new[0] = new[-1] = 0.0
        mass = new
        out[n] = correct / n
    return out


# --- welfare ------------------------------------------------------------------


def welfare_infinite(p: float, w: float) -> float:
    """Limiting share of correct choices in an infinite population."""
    k = cascade_threshold(p, w)
    if k == INFINITE:
        return float(p)
    return absorption_prob(p, k)


def welfare_finite_exact(p: float, w: float, n: int) -> float:
    """Expected fraction of correct choices among ``n`` agents."""
    if int(n) != n or n < 1:
        raise LearningError(f"n must be a positive integer, got {n!r}")
    k = cascade_threshold(p, w)
    if k == INFINITE:
        return float(p)
    dist = walk_run(p, k, int(n))
    return dist.expected_correct / n


def welfare_at_threshold(p: float, k_star, n: int) -> float:
    """Finite-population welfare as a function of the threshold alone."""
    if k_star == INFINITE:
        return float(_check_p(p))
    return walk_run(p, _check_k_star(k_star), int(n)).expected_correct / n


def welfare_finite_decomposition(p: float, k_star, n: int) -> float:
    """Welfare from the stopping-time decomposition, as an independent check.

    Cascades that start at agent m <= n contribute
    ``phi - (m - k_star)(2 phi - 1) / (2n)``; runs still undecided after
    ``n`` agents contribute ``E[#correct | no cascade] / n``.
    """
    k = _check_k_star(k_star)
    p = _check_p(p)
    phi = absorption_prob(p, k)
    pmf = stopping_time_pmf(p, k, n)
    total = math.fsum(
        prob * (phi - (m - k) * (2.0 * phi - 1.0) / (2.0 * n)) for m, prob in pmf
    )
    # sub-distribution of the lead given no cascade through n agents
    dist = walk_run(p, k, n)
    leads = dist.states
    alive = math.fsum((dist.mass * (n + leads) / 2.0).tolist())
    return total + alive / n


def welfare_w4_closed_form(p: float) -> float:
    """Welfare of four fully Bayesian agents (threshold 2), in closed form."""
    q = 1.0 - p
    return (4 * p**2 + 3 * 2 * p**3 * q + 2 * 4 * p**2 * q**2 + 2 * p * q**3) / 4.0


def w_interval_for_threshold(p: float, k: int) -> tuple[float, float]:
    """Half-open interval [w_lo, w_hi) of weights with cascade threshold ``k``."""
    p = _check_p(p)
    if int(k) != k or k < 2:
        raise LearningError(f"threshold must be an integer >= 2, got {k!r}")
    d = _log_odds(p)
    return 0.0 - 0.5 * math.expm1(-(k - 2) * d), -0.5 * math.expm1(-(k - 1) * d)


def default_k_max(p: float) -> int:
    """Smallest threshold whose w-interval reaches past 0.4999."""
    k = 2
    while w_interval_for_threshold(p, k)[1] <= 0.4999:
        k += 1
    return k


def welfare_by_threshold(p: float, n: int, k_max: int) -> dict:
    """Map threshold -> finite welfare for k = 2..k_max plus INFINITE."""
    seqs = {}
    for k in range(2, k_max + 1):
        seqs[k] = _walk_welfare_sequence(p, k, n)[n]
    seqs[INFINITE] = float(p)
    return seqs


class OptimalW(NamedTuple):
    best_k: object
    w_interval: tuple
    welfare: float
    tied_k: tuple
    tied_intervals: tuple

    @property
    def sup_w(self) -> float:
        return max(hi for _, hi in self.tied_intervals)


def optimal_w(p: float, n: int, k_max: int | None = None, tie_tol: float = 1e-13) -> OptimalW:
    """Welfare-maximizing motivation weight for ``n`` agents.

    Welfare depends on ``w`` only through the cascade threshold, so the
    search runs over thresholds 2..k_max plus the no-cascade regime and
    returns the optimal threshold with its interval of weights. Thresholds
    within ``tie_tol`` of the best welfare are all reported; ``best_k`` is
    the smallest of them.
    """
    p = _check_p(p)
    if int(n) != n or n < 4:
        raise LearningError(f"optimal_w requires n >= 4, got {n!r}")
    if k_max is None:
        k_max = default_k_max(p)
    if k_max < 2:
        raise LearningError("k_max must be at least 2")
    table = welfare_by_threshold(p, int(n), int(k_max))
    finite = {k: v for k, v in table.items() if k != INFINITE}
    best_finite = max(finite.values())
    if finite[k_max] >= best_finite - tie_tol:
        raise KMaxTooSmall(f"maximum over thresholds 2..{k_max} is attained at k_max")
    best = max(table.values())
    tied = [k for k, v in table.items() if v >= best - tie_tol]
    tied.sort()

    def interval(k):
        return (0.5, 1.0) if k == INFINITE else w_interval_for_threshold(p, k)

    return OptimalW(
        best_k=tied[0],
        w_interval=interval(tied[0]),
        welfare=table[tied[0]],
        tied_k=tuple(tied),
        tied_intervals=tuple(interval(k) for k in tied),
    )


# --- stopping time --------------------------------------------------------------


def transition_matrix(p: float, k_star) -> np.ndarray:
    """Two-step transition matrix on the k_star + 1 same-parity leads.

    Index ``i`` is the lead ``k_star - 2 i`` (index 0 is the upper barrier):
    with that ordering the matrix has ``p^2`` on its superdiagonal and
    ``(1-p)^2`` on its subdiagonal. Barrier columns are zero, so barrier
    entries of ``T^m x`` carry only the mass arriving at that step.
    """
    p = _check_p(p)
    k = _check_k_star(k_star)
    q = 1.0 - p
    T = np.zeros((k + 1, k + 1))
    for j in range(1, k):
        T[j - 1, j] = p * p
        T[j, j] = 2.0 * p * q
        T[j + 1, j] = q * q
    return T


@dataclass(frozen=True)
class SpectralData:
    k_star: int
    p: float
    transition: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    v_matrix: np.ndarray = field(repr=False)
    v_inverse: np.ndarray = field(repr=False)
    residual: float = 0.0

    @property
    def leading_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])


def _closed_form_eigensystem(p: float, k: int, inv_scale: float):
    r = (1.0 - p) / p
    idx = np.arange(1, k)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    M = 2.0 / np.tan(np.pi * j / (2 * k)) * np.sin(np.pi * i * j / k) * r**i
    M_inv = inv_scale * np.tan(np.pi * i / (2 * k)) * np.sin(np.pi * i * j / k) * r ** (-j)
    v = r**k * (-1.0) ** (idx + 1)
    size = k + 1
    V = np.zeros((size, size))
    V[0, : k - 1] = 1.0
    V[0, k - 1] = 1.0
    V[1:k, : k - 1] = M
    V[k, : k - 1] = v
    V[k, k] = 1.0
    V_inv = np.zeros((size, size))
    V_inv[: k - 1, 1:k] = M_inv
    V_inv[k - 1, 0] = 1.0
    V_inv[k - 1, 1:k] = -np.ones(k - 1) @ M_inv
    V_inv[k, 1:k] = -v @ M_inv
    V_inv[k, k] = 1.0
    lam = np.concatenate([4.0 * p * (1.0 - p) * np.cos(np.pi * idx / (2 * k)) ** 2, [0.0, 0.0]])
    return V, lam, V_inv


def spectral_decomposition(p: float, k_star, orthogonality: str = "standard") -> SpectralData:
    """Closed-form eigendecomposition ``T = V diag(lam) V^-1``.

    The inverse of the eigenvector block ``M`` rests on the sine
    orthogonality relation ``sum_r sin(pi i r/k) sin(pi j r/k) = c delta_ij``.
    ``orthogonality="standard"`` uses ``c = k_star / 2`` (scale ``1/k_star``
    on the inverse entries); ``"half"`` keeps the scale ``1/2``, which
    only inverts ``M`` when ``k_star = 2``.
    Raises ReconstructionFailure (carrying a numerical eigendecomposition)
    when the closed form does not reproduce T within 1e-8.
    """
    p = _check_p(p)
    k = _check_k_star(k_star)
    constants = {"standard": 1.0 / k, "half": 0.5}
    if orthogonality not in constants:
        raise LearningError(f"unknown orthogonality convention {orthogonality!r}")
    T = transition_matrix(p, k)
    V, lam, V_inv = _closed_form_eigensystem(p, k, constants[orthogonality])
    residual = float(np.abs(V @ np.diag(lam) @ V_inv - T).max())
    if not residual <= RECONSTRUCTION_TOL:
        vals, vecs = np.linalg.eig(T)
        order = np.argsort(-vals.real)
        vals, vecs = vals.real[order], vecs.real[:, order]
        numerical = SpectralData(
            k_star=k, p=p, transition=T, eigenvalues=vals,
            v_matrix=vecs, v_inverse=np.linalg.pinv(vecs),
            residual=float(np.abs(vecs @ np.diag(vals) @ np.linalg.pinv(vecs) - T).max()),
        )
        raise ReconstructionFailure(
            f"closed-form V, V^-1 leave residual {residual:.3e} for k_star={k} "
            f"(orthogonality={orthogonality!r})",
            residual=residual,
            numerical=numerical,
        )
    return SpectralData(k_star=k, p=p, transition=T, eigenvalues=lam,
                        v_matrix=V, v_inverse=V_inv, residual=residual)


def _initial_vector(p: float, k: int) -> np.ndarray:
    """Start of the two-step chain: lead 0 for even k_star, the lead after one agent for odd."""
    x = np.zeros(k + 1)
    if k % 2 == 0:
        x[k // 2] = 1.0
    else:
        # index i <-> lead k - 2i; lead +1 at i = (k-1)/2, lead -1 at (k+1)/2
        x[(k - 1) // 2] = p
        x[(k + 1) // 2] = 1.0 - p
    return x


def _cascade_time(k: int, m: int) -> int:
    """Agent index reached after m two-step transitions."""
    return 2 * m + (k % 2)


def stopping_time_pmf(p: float, k_star, n_max: int) -> list[tuple[int, float]]:
    """[(n, Pr[cascade starts at n])] for n = 1..n_max, by powers of T."""
    p = _check_p(p)
    k = _check_k_star(k_star)
    T = transition_matrix(p, k)
    x = _initial_vector(p, k)
    hits = {}
    m = 1
    while _cascade_time(k, m) <= n_max:
        x = T @ x
        hits[_cascade_time(k, m)] = float(x[0] + x[-1])
        x[0] = x[-1] = 0.0
        m += 1
    return [(n, hits.get(n, 0.0)) for n in range(1, n_max + 1)]


def stopping_time_tail(p: float, k_star, n: int) -> float:
    """Pr[no cascade among the first n agents] = Pr[n* > n], by powers of T."""
    p = _check_p(p)
    k = _check_k_star(k_star)
    if n < 0:
        return 1.0
    T = transition_matrix(p, k)
    x = _initial_vector(p, k)
    m = 0
    # interior mass after the last two-step transition not beyond agent n
    while _cascade_time(k, m + 1) <= n:
        x = T @ x
        x[0] = x[-1] = 0.0
        m += 1
    if _cascade_time(k, m) > n:
        # odd k_star and n = 0: nothing has happened yet
        return 1.0
    return math.fsum(x[1:-1].tolist())


def stopping_time_tail_spectral(spec: SpectralData, n: int) -> float:
    """Pr[n* > n] from the eigendecomposition: sum over remaining hit times."""
    k, p = spec.k_star, spec.p
    if n < 0:
        return 1.0
    # smallest transition count m whose hit time exceeds n
    m0 = max(0, (n - k % 2) // 2 + 1)
    lam = spec.eigenvalues
    with np.errstate(divide="ignore"):
        geom = np.where(lam > 0.0, lam**m0 / (1.0 - lam), 1.0 if m0 == 0 else 0.0)
    x0 = _initial_vector(p, k)
    ends = np.zeros(k + 1)
    ends[0] = ends[-1] = 1.0
    return float(ends @ spec.v_matrix @ np.diag(geom) @ spec.v_inverse @ x0)


def expected_stopping_time(p: float, k_star) -> float:
    """E[n*] from the fundamental matrix of the one-step walk on interior leads."""
    p = _check_p(p)
    k = _check_k_star(k_star)
    size = 2 * k - 1
    Q = np.zeros((size, size))
    for i in range(size):
        if i + 1 < size:
            Q[i, i + 1] = p
        if i - 1 >= 0:
            Q[i, i - 1] = 1.0 - p
    t = np.linalg.solve(np.eye(size) - Q, np.ones(size))
    return float(t[k - 1])
