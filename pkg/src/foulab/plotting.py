"""SVG rendering with byte-stable output."""

from __future__ import annotations

import io
import math

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

__all__ = ["figure1_svg", "histogram_svg"]

# 800 x 600 points, so the SVG viewBox is "0 0 800 600"
_SIZE = (800 / 72, 600 / 72)
_RC = {
    "svg.hashsalt": "foulab",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def _render(fig: Figure) -> str:
    buf = io.StringIO()
    with rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    return buf.getvalue()


def figure1_svg(rows, theta: float = 1.0) -> str:
    """Line chart of the three drift-estimator variances against H."""
    rows = np.asarray(rows, dtype=np.float64)
    with rc_context(_RC):
        fig = Figure(figsize=_SIZE)
        ax = fig.add_subplot()
        H = rows[:, 0]
        ax.plot(H, rows[:, 1], label="LSE", color="tab:blue")
        ax.plot(H, rows[:, 2], label="ETE", color="tab:orange", linestyle="--")
        ax.plot(H, rows[:, 3], label="MLE", color="tab:green", linestyle=":")
        ax.set_xlabel("H")
        ax.set_ylabel("asymptotic variance")
        ax.set_title(f"Asymptotic Variance of the Three Estimators (theta = {theta:g})")
        ax.set_xlim(H.min(), H.max())
        ax.legend()
        ax.grid(True, alpha=0.3)
        return _render(fig)


def histogram_svg(samples, variance: float | None, title: str, bins: int = 40) -> str:
    """Density histogram of Monte Carlo statistics with an optional N(0, variance) overlay."""
    x = np.asarray(samples, dtype=np.float64)
    with rc_context(_RC):
        fig = Figure(figsize=_SIZE)
        ax = fig.add_subplot()
        ax.hist(x, bins=bins, density=True, color="0.75", edgecolor="0.4", label="replications")
        if variance is not None and variance > 0:
            sd = math.sqrt(variance)
            lo = min(x.min(), -4 * sd)
            hi = max(x.max(), 4 * sd)
            grid = np.linspace(lo, hi, 400)
            dens = np.exp(-0.5 * (grid / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
            ax.plot(grid, dens, color="tab:red", label=f"N(0, {variance:.4g})")
        ax.set_title(title)
        ax.set_xlabel("statistic")
        ax.set_ylabel("density")
        ax.legend()
        return _render(fig)
