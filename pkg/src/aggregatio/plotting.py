"""Figures for the CLI report path.

matplotlib is an optional dependency; it is imported lazily and forced onto
the Agg backend so figures render headless.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("figures need matplotlib (pip install aggregatio[plot])") from exc
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    plt.rcParams.update(STYLE)
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def welfare_curve(path, w: Sequence[float], welfare: Sequence[float], p: float) -> Path:
    """Infinite-population learning welfare against the motivation weight."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    ax.step(w, welfare, where="post", color="k", lw=1.2)
    ax.axhline(p, color="0.5", ls=":", lw=0.8, label=f"p = {p:g}")
    ax.axvline(0.5, color="0.7", ls="--", lw=0.8)
    ax.set_xlabel("weight on motivation w")
    ax.set_ylabel("equilibrium welfare")
    ax.legend(loc="lower left")
    return _save(fig, path)


def finite_welfare(path, n: Sequence[int], welfare: Sequence[float], limit: float) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    ax.plot(n, welfare, "k.-", ms=3, lw=0.8, label="finite population")
    if math.isfinite(limit):
        ax.axhline(limit, color="0.5", ls=":", lw=0.8, label="infinite-population limit")
    ax.set_xscale("log")
    ax.set_xlabel("population size N")
    ax.set_ylabel("expected share correct")
    ax.legend(loc="lower right")
    return _save(fig, path)


def jury_welfare(path, rows: Sequence[dict]) -> Path:
    """Welfare in each state against w, one line per n."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, sharey=False, figsize=(7.0, 3.0))
    ns = sorted({r["n"] for r in rows})
    for state, ax in zip(("A", "B"), axes):
        for n in ns:
            sel = [r for r in rows if r["n"] == n]
            ax.plot([r["w"] for r in sel], [r[f"welfare_{state.lower()}"] for r in sel],
                    lw=0.9, label=f"n = {n}")
        ax.set_title(f"state {state}")
        ax.set_xlabel("w")
    axes[0].set_ylabel("Pr[majority correct]")
    axes[0].legend(loc="best")
    return _save(fig, path)


def rate_ratios(path, rows: Sequence[dict]) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    for state in sorted({r["state"] for r in rows}):
        sel = [r for r in rows if r["state"] == state]
        ax.plot([r["n"] for r in sel], [r["ratio"] for r in sel], "o-", ms=3, lw=0.8,
                label=f"state {state}")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$(1-W_n)\sqrt{n}\,/\,\mathrm{base}^n$")
    ax.legend(loc="best")
    return _save(fig, path)


def stopping_time(path, n: Sequence[int], pmf: Sequence[float], tail: Sequence[float]) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    keep = [i for i, v in enumerate(pmf) if v > 0]
    ax.semilogy([n[i] for i in keep], [pmf[i] for i in keep], "k.", ms=3, label="Pr[n* = n]")
    pos = [i for i, v in enumerate(tail) if v > 0]
    ax.semilogy([n[i] for i in pos], [tail[i] for i in pos], color="0.5", lw=0.8, label="Pr[n* > n]")
    ax.set_xlabel("agent n")
    ax.legend(loc="upper right")
    return _save(fig, path)
