"""Figures for count statistics (rendered off-screen to files)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure
from scipy import stats

from .continuous import WindowStats


def plot_window_pmf(ws: WindowStats, path: Path, alpha: float = 0.01) -> Path:
    """Empirical count pmf of one window against the Poisson reference pmf."""
    ks = sorted(ws.pmf)
    top = max(ks[-1] if ks else 0, int(stats.poisson.ppf(0.9999, ws.expected_mean)) if ws.expected_mean else 0)
    grid = np.arange(top + 1)
    fig = Figure(figsize=(5, 3.4))
    ax = fig.add_subplot()
    ax.bar(ks, [ws.pmf[k] for k in ks], width=0.6, color="#8fb3d9", label="empirical")
    ax.plot(grid, stats.poisson.pmf(grid, ws.expected_mean), "o", color="#c0392b", ms=4,
            label=f"Poisson({ws.expected_mean:.4g})")
    lo, hi = ws.window
    verdict = "fits" if ws.p_value >= alpha else "rejected"
    ax.set_title(f"[{float(lo):g}, {float(hi):g}): chi2={ws.chi2:.2f}, p={ws.p_value:.3f} ({verdict})", fontsize=9)
    ax.set_xlabel("points in window")
    ax.set_ylabel("probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    return path
