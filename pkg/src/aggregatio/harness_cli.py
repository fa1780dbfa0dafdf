"""Command-line front end.

Every subcommand evaluates one library operation over its parameters and
emits delimited data. With ``--out-dir`` the data go to files next to a
``manifest.json`` holding SHA-256 digests; otherwise they go to stdout.

Exit codes: 0 success, 1 validation error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from . import condorcet as cj
from . import oracles
from . import social_learning as sl
from .binomial import InvalidBracket, binomial_tail_bracket
from .output import (
    GridError,
    atomic_write,
    build_manifest,
    parse_grid,
    parse_int_grid,
    rows_to_csv,
    to_jsonable,
    verify_manifest,
    write_csv,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY = 2


class UsageError(Exception):
    """Bad command line; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for verification failure here
    def error(self, message):
        raise UsageError(message)


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    scalar: bool = False  # one-row table mirroring Result.summary


@dataclass
class Result:
    params: dict
    tables: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    figure: Callable[[Path], object] | None = None
    exit_code: int = EXIT_OK


def _map(fn, items: Sequence):
    """Order-preserving map over grid points, threaded up to AGGREGATIO_THREADS."""
    threads = oracles.thread_count()
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _grid(spec: str, name: str) -> list[float]:
    try:
        return parse_grid(spec)
    except GridError as exc:
        raise ValueError(f"--{name}: {exc}") from None


def _int_grid(spec: str, name: str) -> list[int]:
    try:
        return parse_int_grid(spec)
    except GridError as exc:
        raise ValueError(f"--{name}: {exc}") from None


def _states(arg: str) -> list[str]:
    return ["A", "B"] if arg == "both" else [arg]


# --- Condorcet commands ---------------------------------------------------------


def cmd_cjt_equilibrium(args) -> Result:
    params = cj.JuryParams(args.qa, args.qb, args.w, args.n)
    if params.n < 1:
        raise ValueError("--n must be at least 1")
    eq = cj.equilibrium(params)
    piv = cj.pivotal_probs(params, eq)
    t_upper = None if params.w == 1.0 else cj.response_thresholds(params)[1]
    summary = {
        "sigma_a": eq.sigma_a,
        "sigma_b": eq.sigma_b,
        "n_star": cj.n_star(params),
        "psi": cj.psi(params),
        "t_upper": t_upper,
        "phi_a": piv.phi_a,
        "phi_b": piv.phi_b,
        "pivotal_ratio": piv.ratio,
        "response_a": cj.best_response(params, eq, "a").value,
        "response_b": cj.best_response(params, eq, "b").value,
        "welfare_a": cj.welfare_exact(params, "A"),
        "welfare_b": cj.welfare_exact(params, "B"),
    }
    row = {k: (math.inf if v is None else v) for k, v in summary.items()}
    return Result(
        params={"qa": args.qa, "qb": args.qb, "w": args.w, "n": args.n},
        tables=[Table("equilibrium", list(row), [row], scalar=True)],
        summary=summary,
    )


def cmd_cjt_welfare(args) -> Result:
    ws = _grid(args.w_grid, "w-grid")
    ns = _int_grid(args.n_grid, "n-grid")
    cj.JuryParams(args.qa, args.qb)  # validate once up front
    points = [(n, w) for n in ns for w in ws]

    def row(point):
        n, w = point
        params = cj.JuryParams(args.qa, args.qb, w, n)
        sigma = cj.equilibrium(params).sigma_a if n >= 1 else 1.0
        return {
            "n": n,
            "w": w,
            "n_star": cj.n_star(params),
            "sigma_a": sigma,
            "welfare_a": cj.welfare_exact(params, "A"),
            "welfare_b": cj.welfare_exact(params, "B"),
        }

    rows = _map(row, points)
    cols = ["n", "w", "n_star", "sigma_a", "welfare_a", "welfare_b"]

    def figure(path):
        from . import plotting

        return plotting.jury_welfare(path, rows)

    return Result(
        params={"qa": args.qa, "qb": args.qb, "w_grid": args.w_grid, "n_grid": args.n_grid},
        tables=[Table("welfare", cols, rows)],
        figure=figure,
    )


def _bracket_columns(n: int, s: float) -> dict:
    # failure event: at most n of 2n + 1 votes correct
    trials = 2 * n + 1
    try:
        br = binomial_tail_bracket(trials, s, n / trials)
    except InvalidBracket:
        nan = math.nan
        return {"bracket_lower": nan, "bracket_upper": nan, "log_bracket_lower": nan,
                "log_bracket_upper": nan}
    return {"bracket_lower": br.lower, "bracket_upper": br.upper,
            "log_bracket_lower": br.log_lower, "log_bracket_upper": br.log_upper}


def cmd_cjt_rates(args) -> Result:
    ns = _int_grid(args.n_grid, "n-grid")
    if ns[0] < 1:
        raise ValueError("--n-grid values must be at least 1")
    base_params = cj.JuryParams(args.qa, args.qb, args.w, 1)
    rows = []
    for state in _states(args.state):
        diag = cj.rate_diagnostic_cjt(base_params, state, ns)
        base = cj.rate_base(base_params, state)
        limit = cj.limit_effective_vote_prob(base_params, state)

        def row(entry):
            n, ratio = entry
            params = base_params.with_(n=n)
            s = cj.effective_vote_prob(params, cj.equilibrium(params), state)
            out = {
                "state": state,
                "n": n,
                "sigma_eff": s,
                "sigma_eff_limit": limit,
                "rate_base": base,
                "failure": cj.failure_prob(params, state),
                "ratio": ratio,
            }
            out.update(_bracket_columns(n, s))
            return out

        rows.extend(_map(row, list(diag.entries)))
    cols = ["state", "n", "sigma_eff", "sigma_eff_limit", "rate_base", "failure", "ratio",
            "bracket_lower", "bracket_upper", "log_bracket_lower", "log_bracket_upper"]

    def figure(path):
        from . import plotting

        return plotting.rate_ratios(path, rows)

    return Result(
        params={"qa": args.qa, "qb": args.qb, "w": args.w, "n_grid": args.n_grid,
                "state": args.state},
        tables=[Table("rates", cols, rows)],
        figure=figure,
    )


# --- social learning commands --------------------------------------------------


def cmd_slm_threshold(args) -> Result:
    k = sl.cascade_threshold(args.p, args.w)
    summary = {
        "k_star": k,
        "absorption_prob": sl.absorption_prob(args.p, k) if k != sl.INFINITE else math.nan,
        "welfare_infinite": sl.welfare_infinite(args.p, args.w),
    }
    if k != sl.INFINITE:
        lo, hi = sl.w_interval_for_threshold(args.p, k)
        summary.update(w_lo=lo, w_hi=hi, expected_stopping_time=sl.expected_stopping_time(args.p, k))
    else:
        summary.update(w_lo=0.5, w_hi=1.0, expected_stopping_time=math.inf)
    return Result(
        params={"p": args.p, "w": args.w},
        tables=[Table("threshold", list(summary), [summary], scalar=True)],
        summary=summary,
    )


def cmd_slm_welfare_curve(args) -> Result:
    ws = _grid(args.w_grid, "w-grid")
    sl.cascade_threshold(args.p, 0.0)  # validate p

    def row(w):
        return {"w": w, "k_star": sl.cascade_threshold(args.p, w),
                "welfare": sl.welfare_infinite(args.p, w)}

    rows = _map(row, ws)

    def figure(path):
        from . import plotting

        return plotting.welfare_curve(path, [r["w"] for r in rows], [r["welfare"] for r in rows], args.p)

    return Result(
        params={"p": args.p, "w_grid": args.w_grid},
        tables=[Table("welfare_curve", ["w", "k_star", "welfare"], rows)],
        figure=figure,
    )


def cmd_slm_welfare_finite(args) -> Result:
    ns = _int_grid(args.n_grid, "n-grid")
    if ns[0] < 1:
        raise ValueError("--n-grid values must be at least 1")
    k = sl.cascade_threshold(args.p, args.w)
    limit = sl.welfare_infinite(args.p, args.w)
    rows = _map(lambda n: {"n": n, "k_star": k, "welfare": sl.welfare_finite_exact(args.p, args.w, n),
                           "welfare_limit": limit}, ns)

    def figure(path):
        from . import plotting

        return plotting.finite_welfare(path, ns, [r["welfare"] for r in rows], limit)

    return Result(
        params={"p": args.p, "w": args.w, "n_grid": args.n_grid},
        tables=[Table("welfare_finite", ["n", "k_star", "welfare", "welfare_limit"], rows)],
        figure=figure,
    )


def cmd_slm_optimal_w(args) -> Result:
    ns = _int_grid(args.n_grid, "n-grid")

    def row(n):
        res = sl.optimal_w(args.p, n, args.k_max)
        return {
            "n": n,
            "best_k": res.best_k,
            "w_lo": res.w_interval[0],
            "w_hi": res.w_interval[1],
            "sup_w": res.sup_w,
            "welfare": res.welfare,
            "tied_k": " ".join(str(k) if k != sl.INFINITE else "inf" for k in res.tied_k),
        }

    rows = _map(row, ns)
    return Result(
        params={"p": args.p, "n_grid": args.n_grid, "k_max": args.k_max},
        tables=[Table("optimal_w", ["n", "best_k", "w_lo", "w_hi", "sup_w", "welfare", "tied_k"], rows)],
    )


def cmd_slm_stopping_time(args) -> Result:
    if args.n_max < 1:
        raise ValueError("--n-max must be at least 1")
    k = args.k_star
    if k is None:
        k = sl.cascade_threshold(args.p, args.w)
        if k == sl.INFINITE:
            raise ValueError("no cascade for w >= 1/2; the stopping time is infinite")
    notes = {}
    try:
        spec = sl.spectral_decomposition(args.p, k, args.orthogonality)
    except sl.ReconstructionFailure as exc:
        # fall back to the numerical eigensystem and say so
        spec = exc.numerical
        notes = {"reconstruction_failure": str(exc), "closed_form_residual": exc.residual}
    pmf = sl.stopping_time_pmf(args.p, k, args.n_max)
    rows = [
        {"n": n, "pmf": mass, "tail": sl.stopping_time_tail(args.p, k, n),
         "tail_spectral": sl.stopping_time_tail_spectral(spec, n)}
        for n, mass in pmf
    ]
    eig_rows = [{"index": i, "eigenvalue": float(v)} for i, v in enumerate(spec.eigenvalues)]
    summary = {"k_star": k, "expected_stopping_time": sl.expected_stopping_time(args.p, k),
               "leading_eigenvalue": spec.leading_eigenvalue, "residual": spec.residual, **notes}

    def figure(path):
        from . import plotting

        return plotting.stopping_time(path, [r["n"] for r in rows], [r["pmf"] for r in rows],
                                      [r["tail"] for r in rows])

    return Result(
        params={"p": args.p, "w": args.w, "k_star": args.k_star, "n_max": args.n_max,
                "orthogonality": args.orthogonality},
        tables=[Table("stopping_time", ["n", "pmf", "tail", "tail_spectral"], rows),
                Table("eigenvalues", ["index", "eigenvalue"], eig_rows)],
        summary=summary,
        figure=figure,
    )


# --- Monte Carlo and verification ----------------------------------------------


def cmd_mc(args) -> Result:
    if args.samples < 1:
        raise ValueError("--samples must be positive")
    if args.shards < 1:
        raise ValueError("--shards must be positive")
    rows = []
    if args.model == "slm":
        if args.p is None:
            raise ValueError("--model slm needs --p")
        est = oracles.mc_slm(args.p, args.w, args.n, args.samples, args.seed, args.shards)
        rows.append({"model": "slm", "state": "A", "mean": est.mean, "std_error": est.std_error,
                     "n_samples": est.n_samples, "seed": est.seed, "shards": args.shards,
                     "exact": sl.welfare_finite_exact(args.p, args.w, args.n)})
        params = {"model": "slm", "p": args.p, "w": args.w, "n": args.n}
    else:
        if args.qa is None or args.qb is None:
            raise ValueError("--model cjt needs --qa and --qb")
        jp = cj.JuryParams(args.qa, args.qb, args.w, args.n)
        eq = cj.equilibrium(jp)
        for i, state in enumerate(_states(args.state)):
            # distinct streams per state, still a pure function of the seed
            seed = args.seed + i
            est = oracles.mc_cjt(jp, eq, state, args.samples, seed, args.shards)
            rows.append({"model": "cjt", "state": state, "mean": est.mean, "std_error": est.std_error,
                         "n_samples": est.n_samples, "seed": est.seed, "shards": args.shards,
                         "exact": cj.welfare_exact(jp, state)})
        params = {"model": "cjt", "qa": args.qa, "qb": args.qb, "w": args.w, "n": args.n,
                  "state": args.state}
    params.update(samples=args.samples, seed=args.seed, shards=args.shards)
    for r in rows:
        r["z_score"] = (r["mean"] - r["exact"]) / r["std_error"] if r["std_error"] > 0 else math.nan
    cols = ["model", "state", "mean", "std_error", "n_samples", "seed", "shards", "exact", "z_score"]
    return Result(params=params, tables=[Table("mc", cols, rows)])


def cmd_verify(args) -> Result:
    from .verification import run_battery

    results = run_battery(full=args.full)
    rows = [{"check": r.name, "passed": r.passed, "detail": r.detail} for r in results]
    ok = all(r.passed for r in results)
    return Result(
        params={"mode": "full" if args.full else "quick"},
        tables=[Table("verify", ["check", "passed", "detail"], rows)],
        summary={"passed": sum(r.passed for r in results), "failed": sum(not r.passed for r in results),
                 "seconds": sum(r.seconds for r in results)},
        exit_code=EXIT_OK if ok else EXIT_VERIFY,
    )


# --- argument parsing -----------------------------------------------------------


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None


def _k_star(text):
    if text.lower() in ("inf", "infinite"):
        raise argparse.ArgumentTypeError("k_star must be finite")
    return _int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default: csv for tables, json for single results)")
    common.add_argument("--out-dir", type=Path, default=None,
                        help="write files and manifest.json here instead of stdout")
    common.add_argument("--figure", action="store_true",
                        help="also render a PNG next to the data (needs --out-dir and matplotlib)")

    parser = _Parser(prog="aggregatio", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_, default_format="csv"):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=fn, default_format=default_format)
        return p

    p = add("cjt-equilibrium", cmd_cjt_equilibrium, "jury equilibrium at one (q_a, q_b, w, n)", "json")
    p.add_argument("--qa", type=float, required=True)
    p.add_argument("--qb", type=float, required=True)
    p.add_argument("--w", type=float, default=0.0)
    p.add_argument("--n", type=_int, required=True, help="jury has 2n + 1 voters")

    p = add("cjt-welfare", cmd_cjt_welfare, "state-resolved jury welfare over w and n grids")
    p.add_argument("--qa", type=float, required=True)
    p.add_argument("--qb", type=float, required=True)
    p.add_argument("--w-grid", default="0:0.9:0.1")
    p.add_argument("--n-grid", default="1:20:1")

    p = add("cjt-rates", cmd_cjt_rates, "rate diagnostic and binomial tail bracket over an n grid")
    p.add_argument("--qa", type=float, required=True)
    p.add_argument("--qb", type=float, required=True)
    p.add_argument("--w", type=float, default=0.0)
    p.add_argument("--n-grid", default="50:400:50")
    p.add_argument("--state", choices=("A", "B", "both"), default="both")

    p = add("slm-threshold", cmd_slm_threshold, "cascade threshold and its w interval", "json")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--w", type=float, required=True)

    p = add("slm-welfare-curve", cmd_slm_welfare_curve, "infinite-population welfare over a w grid")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--w-grid", default="0:0.6:0.01")

    p = add("slm-welfare-finite", cmd_slm_welfare_finite, "finite-population welfare over an n grid")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--n-grid", default="1:200:1")

    p = add("slm-optimal-w", cmd_slm_optimal_w, "welfare-maximizing w interval over an n grid")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n-grid", default="4,8,16,32,64,128,256,512,1024")
    p.add_argument("--k-max", type=_int, default=None)

    p = add("slm-stopping-time", cmd_slm_stopping_time, "cascade stopping-time law and spectrum")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--w", type=float, default=0.0)
    p.add_argument("--k-star", type=_k_star, default=None, help="overrides the threshold implied by --w")
    p.add_argument("--n-max", type=_int, default=200)
    p.add_argument("--orthogonality", choices=("standard", "half"), default="standard")

    p = add("mc", cmd_mc, "seeded sharded Monte Carlo welfare estimate")
    p.add_argument("--model", choices=("slm", "cjt"), required=True)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--qa", type=float, default=None)
    p.add_argument("--qb", type=float, default=None)
    p.add_argument("--w", type=float, default=0.0)
    p.add_argument("--n", type=_int, required=True)
    p.add_argument("--state", choices=("A", "B", "both"), default="both")
    p.add_argument("--samples", type=_int, default=100_000)
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--shards", type=_int, default=1)

    p = add("verify", cmd_verify, "run the oracle battery")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", help="reduced grids (default)")
    mode.add_argument("--full", action="store_true", help="acceptance-scale grids")
    return parser


# --- emission ---------------------------------------------------------------------


def _json_document(result: Result, manifest: dict) -> str:
    results = dict(result.summary)
    results.update({t.name: t.rows for t in result.tables if not t.scalar})
    doc = {"params": result.params, "results": results, "manifest": manifest}
    return json.dumps(to_jsonable(doc), indent=2) + "\n"


def _emit(args, result: Result, started: float) -> None:
    fmt = args.format or args.default_format
    params = {"command": args.command, **result.params}
    if args.out_dir is None:
        if args.figure:
            raise ValueError("--figure needs --out-dir")
        if fmt == "csv":
            chunks = []
            for i, t in enumerate(result.tables):
                text = rows_to_csv(t.columns, t.rows)
                chunks.append(text if i == 0 else f"# {t.name}\n{text}")
            sys.stdout.write("\n".join(chunks))
        else:
            manifest = build_manifest(args.command, params, __version__,
                                      time.perf_counter() - started, [], Path.cwd())
            sys.stdout.write(_json_document(result, manifest))
        return

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    stem = args.command.replace("-", "_")
    files = []
    if fmt == "csv":
        for i, t in enumerate(result.tables):
            name = f"{stem}.csv" if i == 0 else f"{stem}_{t.name}.csv"
            files.append(write_csv(out / name, t.columns, t.rows))
    else:
        # the manifest key inside the document cannot hold the document's own digest
        inner = build_manifest(args.command, params, __version__, time.perf_counter() - started, [], out)
        files.append(atomic_write(out / f"{stem}.json", _json_document(result, inner)))
    if args.figure:
        if result.figure is None:
            raise ValueError(f"{args.command} has no figure")
        files.append(result.figure(out / f"{stem}.png"))
    manifest = build_manifest(args.command, params, __version__, time.perf_counter() - started, files, out)
    manifest_path = atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    bad = verify_manifest(manifest_path)
    if bad:
        raise RuntimeError(f"manifest digests do not match: {', '.join(bad)}")
    print(f"wrote {len(files)} file(s) and manifest.json to {out}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"aggregatio: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        result = args.func(args)
        _emit(args, result, started)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"aggregatio: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "verify":
        width = max(len(r["check"]) for r in result.tables[0].rows)
        for r in result.tables[0].rows:
            mark = "PASS" if r["passed"] else "FAIL"
            print(f"{mark}  {r['check']:<{width}}  {r['detail']}", file=sys.stderr)
    return result.exit_code


run = main

if __name__ == "__main__":
    sys.exit(main())
