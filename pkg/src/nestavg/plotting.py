"""Figures written next to the CSV tables. The CSV files remain the primary output."""
from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_sim(results, path, title: str = ""):
    """Normalized risk against ``n``; one panel per (decay parameter, R^2)."""
    panels = defaultdict(lambda: defaultdict(list))
    for res in results:
        for row in res.rows():
            panels[(row["decay_param"], row["r2"])][row["method"]].append((row["n"], row["normalized"]))
    keys = sorted(panels)
    ncol = min(3, len(keys))
    nrow = int(np.ceil(len(keys) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(4.2 * ncol, 3.2 * nrow), squeeze=False)
    for ax, key in zip(axes.flat, keys):
        for method, pts in panels[key].items():
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=method)
        ax.set_title(f"decay {key[0]:g}, $R^2$={key[1]:g}", fontsize=9)
        ax.set_xlabel("n")
        ax.set_ylabel("normalized risk")
        ax.axhline(1.0, color="0.6", lw=0.8, ls=":")
    for ax in list(axes.flat)[len(keys):]:
        ax.set_visible(False)
    axes.flat[0].legend(fontsize=7)
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def plot_diagnostics(rows, path, title: str = ""):
    n = [r.n for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(n, [r.ratio for r in rows], marker="o")
    for r in rows:
        ax.annotate(r.regime, (r.n, r.ratio), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\Delta_n / R_n(m^*)$")
    if title:
        ax.set_title(title, fontsize=10)
    _save(fig, path)


def plot_limit_ratio(table, path, alpha: float):
    """``table`` maps kappa to ``(N values, ratios)``."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kappa, (Ns, ratios) in table.items():
        ax.plot(Ns, ratios, marker="o", ms=3, label=f"kappa={kappa:g}")
    ax.set_xlabel("N")
    ax.set_ylabel("limit risk ratio")
    ax.set_title(f"alpha={alpha:g}", fontsize=10)
    ax.legend(fontsize=8)
    _save(fig, path)
