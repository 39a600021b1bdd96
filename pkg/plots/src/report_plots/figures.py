"""Deterministic figure rendering for the four report kinds.

All figures use the Agg backend with pinned size, DPI and fonts so that
identical inputs produce pixel-identical PNG files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .schemas import (  # noqa: E402
    DECAY_COLUMNS,
    LYAPUNOV_COLUMNS,
    TRAJECTORY_COLUMNS,
    load_csv,
    load_measure_jsonl,
)

_RC = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "report-plots",
}
# strip volatile metadata so repeated renders are byte-identical
_METADATA = {"Software": "report-plots", "Creation Time": None}


def _save(fig, out_path: Path) -> None:
    fig.savefig(out_path, format="png", metadata=_METADATA)
    plt.close(fig)


def render_decay(inputs, out_dir: Path) -> Path:
    """Mean H^1 energy per input file against its theoretical envelope."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for path in inputs:
            data = load_csv(path, DECAY_COLUMNS)
            label = Path(path).stem
            ax.semilogy(data["t"], data["mean_h1_sq"], label=f"{label} mean")
            lo = np.maximum(data["mean_h1_sq"] - 3.0 * data["se"], 1e-300)
            ax.fill_between(data["t"], lo,
                            data["mean_h1_sq"] + 3.0 * data["se"], alpha=0.25)
            ax.semilogy(data["t"], data["envelope"], linestyle="--",
                        label=f"{label} envelope")
        ax.set_xlabel("t")
        ax.set_ylabel(r"mean $\|u\|^2_{H^1}$")
        ax.set_title("Ensemble energy decay vs envelope")
        ax.legend(loc="best")
        out = Path(out_dir) / "decay.png"
        _save(fig, out)
    return out


def render_blowup(inputs, out_dir: Path) -> Path:
    """Slope and amplitude history of (wave-breaking) trajectories."""
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
        for path in inputs:
            data = load_csv(path, TRAJECTORY_COLUMNS)
            label = Path(path).stem
            ax1.plot(data["t"], data["min_ux"], label=f"{label} min $u_x$")
            ax2.plot(data["t"], data["max_u"], label=f"{label} max $|u|$")
            kind = int(data["blowup_kind"][-1])
            if kind:
                t_star = data["t"][-1]
                for ax in (ax1, ax2):
                    ax.axvline(t_star, color="k", linestyle=":", linewidth=1)
                ax1.annotate(f"kind {kind} @ t={t_star:.4g}",
                             xy=(t_star, data["min_ux"][-1]),
                             fontsize=8, ha="right")
        ax1.set_ylabel(r"min $u_x$")
        ax2.set_ylabel(r"max $|u|$")
        ax2.set_xlabel("t")
        ax1.set_title("Wave-breaking slope profile")
        ax1.legend(loc="best")
        ax2.legend(loc="best")
        out = Path(out_dir) / "blowup.png"
        _save(fig, out)
    return out


def render_lyapunov(inputs, out_dir: Path) -> Path:
    """Mean Lyapunov functional against the exponential growth bound."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for path in inputs:
            data = load_csv(path, LYAPUNOV_COLUMNS)
            label = Path(path).stem
            ax.plot(data["t"], data["mean_V"], label=f"{label} mean V")
            ax.fill_between(data["t"], data["mean_V"] - 3.0 * data["se"],
                            data["mean_V"] + 3.0 * data["se"], alpha=0.25)
            ax.plot(data["t"], data["bound"], linestyle="--",
                    label=f"{label} bound")
        ax.set_xlabel("t")
        ax.set_ylabel(r"$V(\|u\|^2_{H^s})$")
        ax.set_title("Lyapunov functional vs growth bound")
        ax.legend(loc="best")
        out = Path(out_dir) / "lyapunov.png"
        _save(fig, out)
    return out


def render_measure_ladder(inputs, out_dir: Path) -> Path:
    """Energy-distance ladder with bootstrap bands per measure report."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for path in inputs:
            record = load_measure_jsonl(path)
            label = Path(path).stem
            xs = np.arange(len(record["ladder"]))
            ds = np.array([r["distance"] for r in record["ladder"]])
            ses = np.array([r["se"] for r in record["ladder"]])
            ax.errorbar(xs, ds, yerr=3.0 * ses, marker="o", capsize=4,
                        label=label)
            ax.set_xticks(xs)
            ax.set_xticklabels(
                ["T={:g} vs {:g}".format(*r["pair"]) for r in record["ladder"]])
            ind = record["n_independence"]
            ax.axhline(ind["distance"], color="gray", linestyle=":",
                       linewidth=1)
            ax.annotate(
                "handoff independence: d={:.3g} (tol {})".format(
                    ind["distance"], "ok" if ind["within_tolerance"] else "FAIL"),
                xy=(0.02, 0.95), xycoords="axes fraction", fontsize=8,
                va="top")
        ax.set_ylabel("energy distance")
        ax.set_title("Backward-start measure ladder")
        ax.legend(loc="best")
        out = Path(out_dir) / "measure_ladder.png"
        _save(fig, out)
    return out


RENDERERS = {
    "decay": render_decay,
    "blowup": render_blowup,
    "lyapunov": render_lyapunov,
    "measure_ladder": render_measure_ladder,
}
