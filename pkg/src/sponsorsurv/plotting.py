"""Standalone SVG figures: life-table curves and per-profile survival curves."""

from __future__ import annotations

import io
from collections.abc import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .nonparametric import LifeTable, SurvivorCurve, smoothed_hazard  # noqa: E402

# Fixed element ids and no timestamp so repeated runs give identical bytes.
_RC = {"svg.hashsalt": "sponsorsurv", "svg.fonttype": "none"}


def _to_svg(fig) -> str:
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def lifetable_svg(table: LifeTable, bandwidth: float = 3) -> str:
    """Survivor function and smoothed hazard on twin axes."""
    periods, smooth = smoothed_hazard(table, bandwidth)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        curve = table.curve
        ax.step(curve.periods, curve.values, where="post", color="black", label="Survivor function")
        ax.set_xlabel("Years")
        ax.set_ylabel("Survivor function")
        ax.set_ylim(0, 1.02)
        ax.set_xlim(0, curve.horizon)
        ax2 = ax.twinx()
        ax2.plot(periods, smooth, color="black", linestyle="--", label=f"Smoothed hazard (bandwidth {bandwidth:g})")
        ax2.set_ylabel("Hazard rate")
        ax2.set_ylim(0, max(0.05, float(smooth.max()) * 1.1))
        handles = ax.get_legend_handles_labels()[0] + ax2.get_legend_handles_labels()[0]
        ax.legend(handles, [h.get_label() for h in handles], loc="upper right", frameon=False)
        fig.tight_layout()
    return _to_svg(fig)


def survival_curves_svg(curves: Mapping[str, SurvivorCurve]) -> str:
    """One step curve per sponsorship profile."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for name, curve in curves.items():
            ax.step(curve.periods, curve.values, where="post", label=name)
        ax.set_xlabel("Years")
        ax.set_ylabel("Probability of continuing")
        ax.set_ylim(0, 1.02)
        if curves:
            ax.legend(frameon=False)
        fig.tight_layout()
    return _to_svg(fig)
