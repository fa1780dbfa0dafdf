"""Acceptance suite.

One test per criterion. Each prints a single ``criterion N: PASS|FAIL`` line,
and the lines are repeated in the pytest terminal summary (see conftest.py).
Run directly with ``python3 tests/test_acceptance.py`` for the lines alone.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from aggregatio import condorcet as cj
from aggregatio import oracles
from aggregatio import social_learning as sl
from aggregatio.beliefs import FiniteMeasure, motivated_mix
from aggregatio.binomial import binomial_tail_bracket, log_lower_tail
from aggregatio.harness_cli import main as cli_main
from aggregatio.output import read_csv

RESULTS: dict[int, str] = {}


def _report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def _spread(values):
    values = np.asarray(values, dtype=float)
    return float(values.max() / values.min()) if values.min() > 0 else math.inf


def _median_spread(values):
    values = np.asarray(values, dtype=float)
    med = float(np.median(values))
    return float(max(values.max() / med, med / values.min()))


def test_criterion_01_belief_minimizer():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        size = int(rng.integers(2, 5))
        P = FiniteMeasure(range(size), rng.dirichlet(np.ones(size)))
        z = rng.dirichlet(np.ones(size))
        if size > 2 and rng.uniform() < 0.5:
            z[rng.integers(size)] = 0.0
            z /= z.sum()
        Pz = FiniteMeasure(range(size), z)
        w = float(rng.uniform())
        grid = oracles.grid_minimize_dissonance(P, Pz, w, 0.01)
        mix = motivated_mix(P, Pz, w)
        worst = max(worst, float(np.max(np.abs(np.subtract(grid.weights, mix.weights)))))
    elapsed = time.perf_counter() - start
    ok = worst <= 0.01 + 1e-12 and elapsed < 10.0
    _report(1, ok, f"50 triples, max |grid - mix| = {worst:.4f} (cell 0.01), {elapsed:.1f} s (< 10 s)")


def test_criterion_02_equilibrium_fixed_point():
    qs = [round(0.55 + 0.05 * i, 2) for i in range(8)]
    ws = [round(0.1 * i, 1) for i in range(10)]
    contradictions = 0
    worst_gap = 0.0
    mixing = 0
    for qa in qs:
        for qb in (q for q in qs if q <= qa):
            for w in ws:
                for n in range(1, 13):
                    params = cj.JuryParams(qa, qb, w, n)
                    eq = cj.equilibrium(params)
                    for signal, own, action in (("a", eq.sigma_a, cj.Response.VOTE_A),
                                                ("b", eq.sigma_b, cj.Response.VOTE_B)):
                        resp = cj.best_response(params, eq, signal)
                        allowed = {cj.Response.INDIFFERENT} if own < 1.0 else {action, cj.Response.INDIFFERENT}
                        contradictions += resp not in allowed
                    if eq.sigma_a < 1.0:
                        mixing += 1
                        gap = abs(cj.pivotal_probs(params, eq).ratio - cj.psi(params))
                        worst_gap = max(worst_gap, gap)
    ok = contradictions == 0 and worst_gap <= 1e-9
    _report(2, ok, f"{contradictions} contradictions; {mixing} mixing equilibria with "
                   f"max |phi_A/phi_B - psi| = {worst_gap:.2e} (<= 1e-9)")


def test_criterion_03_large_jury_welfare():
    vals = [cj.welfare_exact(cj.JuryParams(0.6, 0.6, 0.0, n), "A") for n in range(10, 201)]
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    ok = vals[-1] >= 0.99 and increasing
    _report(3, ok, f"W(n=200) = {vals[-1]:.6f} (>= 0.99); strictly increasing over n=10..200: {increasing}")


def test_criterion_04_welfare_monotone_in_w():
    base = cj.JuryParams(0.8, 0.6, 0.0, 20)
    ws = [round(0.05 * i, 2) for i in range(20)]
    regime = [w for w in ws if base.n >= cj.n_star(base.with_(w=w))]
    wa = [cj.welfare_exact(base.with_(w=w), "A") for w in regime]
    wb = [cj.welfare_exact(base.with_(w=w), "B") for w in regime]
    up = all(b > a for a, b in zip(wa, wa[1:]))
    down = all(b < a for a, b in zip(wb, wb[1:]))
    sym = cj.JuryParams(0.7, 0.7, 0.0, 20)
    flat = max(abs(cj.welfare_exact(sym.with_(w=w), s) - cj.welfare_exact(sym, s)) for w in ws for s in "AB")
    ok = len(regime) >= 2 and up and down and flat <= 1e-12
    _report(4, ok, f"mixing regime w in [{regime[0]}, {regime[-1]}] ({len(regime)} points): "
                   f"A increasing {up}, B decreasing {down}; symmetric drift {flat:.1e} (<= 1e-12)")


def test_criterion_05_rate_diagnostic():
    ns = list(range(50, 401, 50))
    spreads = []
    for qa, qb, w in ((0.6, 0.6, 0.0), (0.8, 0.6, 0.0), (0.8, 0.6, 0.5)):
        diag = cj.rate_diagnostic_cjt(cj.JuryParams(qa, qb, w, 1), "A", ns)
        spreads.append(_median_spread(diag.values))
    base_gap = abs(cj.rate_base(cj.JuryParams(0.8, 0.6, 0.0), "A") - cj.rate_base(cj.JuryParams(0.8, 0.6, 0.5), "A"))
    ok = max(spreads) <= 3.0 and base_gap <= 1e-12
    _report(5, ok, "spread about median " + ", ".join(f"{s:.3f}" for s in spreads)
            + f" (<= 3); base gap across w = {base_gap:.1e} (<= 1e-12)")


def test_criterion_06_bracket_soundness():
    rng = np.random.default_rng(606)
    misses = checked = 0
    while checked < 200:
        n = int(rng.integers(2, 2001))
        p = float(rng.uniform(0.02, 0.98))
        alpha = float(rng.uniform(1.0 / n, p))
        if alpha >= p or math.floor(alpha * n + 1e-9) < 1:
            continue
        checked += 1
        br = binomial_tail_bracket(n, p, alpha)
        exact = log_lower_tail(n, p, math.floor(alpha * n + 1e-9))
        # compare in log space; both sides underflow for large n
        if not (br.log_lower <= exact + 1e-12 and exact <= br.log_upper + 1e-12):
            misses += 1
    _report(6, misses == 0, f"{misses} of {checked} brackets miss the exact tail (log-space comparison)")


def test_criterion_07_learning_oracles():
    worst = 0.0
    for p in (0.6, 0.75, 0.9):
        for k in (2, 3, 4):
            lo, hi = sl.w_interval_for_threshold(p, k)
            w = 0.5 * (lo + hi)
            for n in range(1, 17):
                worst = max(worst, abs(oracles.enumerate_slm(p, w, n).welfare - sl.welfare_finite_exact(p, w, n)))
    phi = sl.absorption_prob(0.75, 2)
    up, _ = oracles.absorption_linear_solve(0.75, 2)
    est = oracles.mc_slm(0.75, 0.0, 200, 100_000, seed=2024, shards=4)
    exact = sl.welfare_finite_exact(0.75, 0.0, 200)
    z = (est.mean - exact) / est.std_error
    ok = worst <= 1e-12 and abs(phi - 0.9) <= 1e-12 and abs(phi - up) <= 1e-12 and abs(z) <= 3.0
    _report(7, ok, f"DP vs enumeration max err {worst:.1e}; absorption {phi:.15f} vs solve {up:.15f}; "
                   f"MC z = {z:+.2f} (|z| <= 3)")


def test_criterion_08_welfare_curve(tmp_path, capsys):
    p = 0.75
    code = cli_main(["slm-welfare-curve", "--p", str(p), "--w-grid", "0:0.6:0.01", "--out-dir", str(tmp_path)])
    capsys.readouterr()
    _, rows = read_csv(tmp_path / "slm_welfare_curve.csv")
    below = [r for r in rows if r["w"] < 0.5]
    above = [r for r in rows if r["w"] >= 0.5]
    nondecreasing = all(b["welfare"] >= a["welfare"] for a, b in zip(below, below[1:]))
    values_ok = all(r["welfare"] == pytest.approx(sl.absorption_prob(p, r["k_star"]), abs=1e-15) for r in below)
    # each point lies in the interval of its threshold, so jumps sit on interval boundaries
    inside = all(lo <= r["w"] < hi for r in below
                 for lo, hi in [sl.w_interval_for_threshold(p, r["k_star"])])
    jumps_ok = all(
        (a["welfare"] != b["welfare"]) == (a["k_star"] != b["k_star"])
        and (a["k_star"] == b["k_star"] or
             a["w"] < sl.w_interval_for_threshold(p, b["k_star"])[0] <= b["w"])
        for a, b in zip(below, below[1:])
    )
    flat = all(r["welfare"] == p and r["k_star"] == math.inf for r in above)
    above_p = all(sl.absorption_prob(p, k) > p for k in range(2, 60))
    ok = code == 0 and nondecreasing and values_ok and inside and jumps_ok and flat and above_p
    steps = sorted({r["k_star"] for r in below})
    _report(8, ok, f"{len(rows)} points, thresholds {steps} below 1/2; nondecreasing {nondecreasing}, "
                   f"values phi_k {values_ok}, jumps on boundaries {inside and jumps_ok}, "
                   f"constant p on [0.5, 0.6] {flat}, phi_k > p {above_p}")


def test_criterion_09_finite_welfare_and_optimal_w():
    mono = True
    for w in (0.0, 0.2, 0.4, 0.45, 0.49):
        vals = [sl.welfare_finite_exact(0.75, w, n) for n in range(4, 201)]
        mono &= all(b >= a for a, b in zip(vals, vals[1:]))
    small = sl.optimal_w(0.75, 4)
    small_ok = (small.best_k == 2 and abs(small.welfare - 0.796875) <= 1e-12
                and abs(small.welfare - sl.welfare_w4_closed_form(0.75)) <= 1e-12)
    ns = [4 * 2**i for i in range(9)]
    fits = [sl.optimal_w(0.75, n) for n in ns]
    sups = [f.sup_w for f in fits]
    sup_ok = all(b >= a for a, b in zip(sups, sups[1:])) and max(sups) < 0.5
    k_ok = fits[-1].best_k > fits[0].best_k
    ok = mono and small_ok and sup_ok and k_ok
    _report(9, ok, f"monotone in n {mono}; n=4 best_k={small.best_k} welfare={small.welfare}; "
                   f"sup w* over n=4..1024 from {sups[0]:.4f} to {sups[-1]:.4f} (< 0.5); "
                   f"best_k {fits[0].best_k} -> {fits[-1].best_k}")


def test_criterion_10_spectral_and_rates():
    p = 0.75
    residuals, tail_spreads, gap_spreads = [], [], []
    for k in range(2, 7):
        spec = sl.spectral_decomposition(p, k)
        residuals.append(spec.residual)
        lam = spec.leading_eigenvalue
        tail_spreads.append(_spread([sl.stopping_time_tail(p, k, N) / lam ** (N / 2) for N in range(10, 201)]))
        phi = sl.absorption_prob(p, k)
        gap_spreads.append(_spread([(phi - sl.welfare_at_threshold(p, k, n)) * n for n in range(100, 2001, 100)]))
    half_scale_fails = []
    for k in range(3, 7):
        try:
            sl.spectral_decomposition(p, k, orthogonality="half")
        except sl.ReconstructionFailure as exc:
            half_scale_fails.append(exc.residual > 1e-8 and exc.numerical.residual <= 1e-8)
    et = sl.expected_stopping_time(p, 2)
    ok = (max(residuals) <= 1e-8 and max(tail_spreads) <= 3.0 and max(gap_spreads) <= 3.0
          and abs(et - 3.2) <= 1e-12 and half_scale_fails == [True] * 4)
    _report(10, ok, f"residual max {max(residuals):.1e}; tail/lambda^(N/2) spread {max(tail_spreads):.3f}; "
                    f"(phi - W_n) n spread {max(gap_spreads):.4f}; E[n*] = {et!r}; "
                    f"unscaled inverse reports ReconstructionFailure for k*=3..6")


def _mc_csv(out_dir, threads):
    env = dict(os.environ, AGGREGATIO_THREADS=str(threads))
    cmd = [sys.executable, "-m", "aggregatio.harness_cli", "mc", "--model", "slm", "--p", "0.7", "--w", "0.2",
           "--n", "80", "--samples", "40000", "--seed", "77", "--shards", "8", "--out-dir", str(out_dir)]
    subprocess.run(cmd, env=env, check=True, capture_output=True)
    return (Path(out_dir) / "mc.csv").read_bytes()


def test_criterion_11_mc_determinism(tmp_path):
    runs = [_mc_csv(tmp_path / name, t) for name, t in (("a", 1), ("b", 1), ("c", 4))]
    ok = runs[0] == runs[1] == runs[2]
    _report(11, ok, "mc CSV byte-identical across two runs and AGGREGATIO_THREADS in {1, 4}: " + str(ok))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
