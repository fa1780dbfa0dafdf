"""Oracle battery behind ``aggregatio verify``.

Each check pits one closed-form operation against a structurally different
reference computation from :mod:`aggregatio.oracles`. ``full=True`` runs the
checks at acceptance scale; the quick battery keeps every check but shrinks
grids and sample counts.
"""

from __future__ import annotations

import math
import time
from typing import Callable, NamedTuple

import numpy as np

from . import condorcet as cj
from . import oracles
from . import social_learning as sl
from .beliefs import FiniteMeasure, motivated_mix
from .binomial import binomial_tail_bracket, log_lower_tail


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_measure(rng, size, sparse=False):
    x = rng.dirichlet(np.ones(size))
    if sparse and size > 2:
        x[rng.integers(size)] = 0.0
        x /= x.sum()
    return FiniteMeasure(range(size), x)


def check_motivated_mix(full: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(20240101)
    trials = 50 if full else 6
    worst = 0.0
    for _ in range(trials):
        size = int(rng.integers(2, 5 if full else 4))
        P, Pz = _random_measure(rng, size), _random_measure(rng, size, sparse=True)
        w = float(rng.uniform())
        grid = oracles.grid_minimize_dissonance(P, Pz, w, 0.01)
        mix = motivated_mix(P, Pz, w)
        worst = max(worst, max(abs(a - b) for a, b in zip(grid.weights, mix.weights)))
    return worst <= 0.01 + 1e-12, f"max |grid - mix| = {worst:.4g} over {trials} triples"


def _jury_grid(full: bool):
    qs = [round(0.55 + 0.05 * i, 2) for i in range(8)] if full else [0.6, 0.7, 0.8]
    ws = [round(0.1 * i, 1) for i in range(10)] if full else [0.0, 0.5, 0.9]
    ns = range(1, 13) if full else range(1, 6)
    for qa in qs:
        for qb in qs:
            if qb > qa:
                continue
            for w in ws:
                for n in ns:
                    yield cj.JuryParams(qa, qb, w, n)


def check_n_star(full: bool) -> tuple[bool, str]:
    bad = []
    for params in _jury_grid(full):
        if params.n != 1:
            continue
        if cj.n_star(params) != oracles.smallest_mixing_n(params):
            bad.append((params.q_a, params.q_b, params.w))
    return not bad, f"{len(bad)} mismatches" + (f", e.g. {bad[0]}" if bad else "")


def check_equilibrium_bisection(full: bool) -> tuple[bool, str]:
    worst = 0.0
    count = 0
    for params in _jury_grid(full):
        eq = cj.equilibrium(params)
        if eq.sigma_a >= 1.0:
            continue
        root = oracles.mixing_sigma_by_bisection(params)
        if root is None:
            return False, f"no bisection root at {params}"
        worst = max(worst, abs(root - eq.sigma_a))
        count += 1
    return worst <= 1e-9, f"max |sigma_a - bisection| = {worst:.3g} over {count} mixing equilibria"


def check_pivotal(full: bool) -> tuple[bool, str]:
    worst = 0.0
    for params in _jury_grid(full):
        if params.n > (6 if full else 4):
            continue
        eq = cj.equilibrium(params)
        pp = cj.pivotal_probs(params, eq)
        ea, eb = oracles.enumerate_pivotal(params, eq)
        worst = max(worst, abs(pp.phi_a - ea), abs(pp.phi_b - eb))
    return worst <= 1e-12, f"max |phi - enumeration| = {worst:.3g}"


def check_best_response(full: bool) -> tuple[bool, str]:
    bad = 0
    total = 0
    for params in _jury_grid(full):
        eq = cj.equilibrium(params)
        for signal, own in (("a", eq.sigma_a), ("b", eq.sigma_b)):
            resp = cj.best_response(params, eq, signal)
            expected = cj.Response.VOTE_A if signal == "a" else cj.Response.VOTE_B
            if own < 1.0:
                ok = resp is cj.Response.INDIFFERENT
            else:
                ok = resp in (expected, cj.Response.INDIFFERENT)
            if params.n <= 4:
                ua, ub = oracles.motivated_pivot_comparison(params, eq, signal)
                if resp is cj.Response.VOTE_A:
                    ok = ok and ua > ub
                elif resp is cj.Response.VOTE_B:
                    ok = ok and ua < ub
            bad += not ok
            total += 1
    return bad == 0, f"{bad} of {total} responses contradict the equilibrium"


def check_cjt_welfare(full: bool) -> tuple[bool, str]:
    worst = 0.0
    for params in _jury_grid(full):
        if params.n > (6 if full else 3) or params.w not in (0.0, 0.5, 0.9):
            continue
        eq = cj.equilibrium(params)
        for state in ("A", "B"):
            worst = max(worst, abs(cj.welfare_exact(params, state) - oracles.enumerate_cjt(params, eq, state)))
    return worst <= 1e-12, f"max |welfare - enumeration| = {worst:.3g}"


def check_bracket(full: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    trials = 200 if full else 40
    misses = 0
    for _ in range(trials):
        n = int(rng.integers(2, 2001))
        p = float(rng.uniform(0.05, 0.95))
        alpha = float(rng.uniform(1.0 / n, p))
        if math.floor(alpha * n) < 1 or alpha >= p:
            continue
        br = binomial_tail_bracket(n, p, alpha)
        exact = log_lower_tail(n, p, math.floor(alpha * n + 1e-9))
        if not (br.log_lower <= exact + 1e-12 and exact <= br.log_upper + 1e-12):
            misses += 1
    return misses == 0, f"{misses} of {trials} brackets miss the exact tail"


def check_cjt_rate(full: bool) -> tuple[bool, str]:
    ns = list(range(50, 401, 50)) if full else [50, 100, 200]
    spreads = []
    for qa, qb, w in ((0.6, 0.6, 0.0), (0.8, 0.6, 0.0), (0.8, 0.6, 0.5)):
        diag = cj.rate_diagnostic_cjt(cj.JuryParams(qa, qb, w, 1), "A", ns)
        spreads.append(diag.spread_about_median())
    return max(spreads) <= 3.0, "spread about median: " + ", ".join(f"{s:.3f}" for s in spreads)


def _learning_grid(full: bool):
    ps = [round(0.55 + 0.05 * i, 2) for i in range(9)] if full else [0.6, 0.75, 0.9]
    ws = [round(0.05 * i, 2) for i in range(10)]
    for p in ps:
        for w in ws:
            yield p, w


def check_cascade_threshold(full: bool) -> tuple[bool, str]:
    bad = []
    for p, w in _learning_grid(full):
        k = sl.cascade_threshold(p, w)
        via_decision = next(j for j in range(2, 10_000) if sl.decision(p, w, -j, "a") is sl.Choice.B)
        if not (k == oracles.smallest_cascade_k(p, w) == via_decision):
            bad.append((p, w))
    return not bad, f"{len(bad)} mismatches" + (f", e.g. {bad[0]}" if bad else "")


def check_posterior(full: bool) -> tuple[bool, str]:
    worst = 0.0
    for p, w in _learning_grid(full):
        for k in range(-4, 5):
            for signal in ("a", "b"):
                ref = oracles.posterior_by_enumeration(p, w, k, signal)
                worst = max(worst, abs(ref - sl.motivated_posterior(p, w, k, signal)))
    return worst <= 1e-12, f"max |posterior - enumeration| = {worst:.3g}"


def check_absorption(full: bool) -> tuple[bool, str]:
    worst_phi = worst_time = 0.0
    for p in (0.55, 0.6, 0.75, 0.9):
        for k in range(2, 9 if full else 5):
            up, t = oracles.absorption_linear_solve(p, k)
            worst_phi = max(worst_phi, abs(up - sl.absorption_prob(p, k)))
            worst_time = max(worst_time, abs(t - sl.expected_stopping_time(p, k)) / t)
    ok = worst_phi <= 1e-12 and worst_time <= 1e-10
    return ok, f"absorption err {worst_phi:.3g}, relative E[n*] err {worst_time:.3g}"


def check_slm_welfare(full: bool) -> tuple[bool, str]:
    worst = 0.0
    n_max = 16 if full else 10
    for p in (0.6, 0.75, 0.9):
        for k in (2, 3, 4):
            lo, hi = sl.w_interval_for_threshold(p, k)
            w = 0.5 * (lo + hi)
            for n in range(1, n_max + 1):
                e = oracles.enumerate_slm(p, w, n)
                worst = max(worst, abs(e.welfare - sl.welfare_finite_exact(p, w, n)))
                worst = max(worst, abs(e.cascade_up + e.cascade_down - (1.0 - sl.stopping_time_tail(p, k, n))))
        e = oracles.enumerate_slm(p, 0.6, 8)
        worst = max(worst, abs(e.welfare - sl.welfare_finite_exact(p, 0.6, 8)))
    return worst <= 1e-12, f"max |DP - enumeration| = {worst:.3g}"


def check_slm_decomposition(full: bool) -> tuple[bool, str]:
    worst = abs(sl.welfare_finite_exact(0.75, 0.0, 4) - sl.welfare_w4_closed_form(0.75))
    for p in (0.6, 0.75, 0.9):
        worst = max(worst, abs(sl.welfare_finite_exact(p, 0.0, 4) - sl.welfare_w4_closed_form(p)))
        for k in (2, 3, 5):
            for n in (4, 17, 60):
                worst = max(worst, abs(sl.welfare_at_threshold(p, k, n) - sl.welfare_finite_decomposition(p, k, n)))
    return worst <= 1e-12, f"max |DP - decomposition| = {worst:.3g}"


def check_spectral(full: bool) -> tuple[bool, str]:
    worst = 0.0
    worst_res = 0.0
    for p in (0.6, 0.75):
        for k in range(2, 7):
            spec = sl.spectral_decomposition(p, k)
            worst_res = max(worst_res, spec.residual)
            for n in range(0, 101 if full else 41):
                worst = max(worst, abs(sl.stopping_time_tail(p, k, n) - sl.stopping_time_tail_spectral(spec, n)))
    ok = worst <= 1e-9 and worst_res <= 1e-8
    return ok, f"tail err {worst:.3g}, reconstruction residual {worst_res:.3g}"


def check_stopping_pmf(full: bool) -> tuple[bool, str]:
    worst = 0.0
    for p in (0.6, 0.75):
        for k in (2, 3, 4):
            pmf = dict(sl.stopping_time_pmf(p, k, 14))
            ref = oracles.stopping_pmf_by_enumeration(p, k, 14)
            worst = max(worst, max(abs(pmf[n] - ref[n]) for n in pmf))
    return worst <= 1e-12, f"max |pmf - enumeration| = {worst:.3g}"


def check_optimal_w(full: bool) -> tuple[bool, str]:
    p = 0.75
    bad = []
    for n in ((4, 16, 64, 256) if full else (4, 16)):
        res = sl.optimal_w(p, n)
        # brute force over a fine w grid, independent of the threshold table
        ws = np.linspace(0.0, 0.6, 601)
        vals = [sl.welfare_finite_exact(p, float(w), n) for w in ws]
        best = max(vals)
        if abs(best - res.welfare) > 1e-12:
            bad.append(n)
    return not bad, f"grid search disagrees at n in {bad}" if bad else "grid search agrees"


def check_mc(full: bool) -> tuple[bool, str]:
    samples = 100_000 if full else 20_000
    e1 = oracles.mc_slm(0.75, 0.0, 60, samples, seed=11, shards=4)
    t1 = sl.welfare_finite_exact(0.75, 0.0, 60)
    params = cj.JuryParams(0.8, 0.6, 0.0, 2)
    e2 = oracles.mc_cjt(params, cj.equilibrium(params), "A", samples, seed=12, shards=4)
    t2 = cj.welfare_exact(params, "A")
    ok = e1.within(t1) and e2.within(t2)
    return ok, (f"slm {(e1.mean - t1) / e1.std_error:+.2f} se, "
                f"cjt {(e2.mean - t2) / e2.std_error:+.2f} se")


CHECKS: list[tuple[str, Callable[[bool], tuple[bool, str]]]] = [
    ("beliefs.motivated_mix vs grid search", check_motivated_mix),
    ("condorcet.n_star vs mixing-existence scan", check_n_star),
    ("condorcet.equilibrium vs bisection", check_equilibrium_bisection),
    ("condorcet.pivotal_probs vs enumeration", check_pivotal),
    ("condorcet.best_response vs motivated enumeration", check_best_response),
    ("condorcet.welfare_exact vs profile enumeration", check_cjt_welfare),
    ("condorcet.binomial_tail_bracket vs exact tail", check_bracket),
    ("condorcet.rate_diagnostic_cjt bounded", check_cjt_rate),
    ("social_learning.cascade_threshold vs decision search", check_cascade_threshold),
    ("social_learning.motivated_posterior vs enumeration", check_posterior),
    ("social_learning.absorption_prob/E[n*] vs linear solve", check_absorption),
    ("social_learning.welfare_finite_exact vs replay", check_slm_welfare),
    ("social_learning.welfare decomposition cross-check", check_slm_decomposition),
    ("social_learning.stopping_time_tail vs spectral", check_spectral),
    ("social_learning.stopping_time_pmf vs enumeration", check_stopping_pmf),
    ("social_learning.optimal_w vs w-grid search", check_optimal_w),
    ("oracles.mc_slm / mc_cjt within 3 se", check_mc),
]


def run_battery(full: bool = False) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = fn(full)
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return results
