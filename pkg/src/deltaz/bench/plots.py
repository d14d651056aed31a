"""Deterministic SVG figures for a finished benchmark."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PARAM_LABELS = ("rho1", "theta1", "rho2", "theta2")
_RC = {
    "svg.hashsalt": "deltaz",
    "svg.fonttype": "path",
    "path.simplify": False,
    "font.family": "DejaVu Sans",
}


def _save(fig, path: Path) -> None:
    # no timestamp, fixed element ids: identical input gives identical bytes
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_parameters(curves: Sequence, path) -> Path:
    """Mean +/- one std of each normalized parameter against the update index."""
    if not curves:
        raise ValueError("no curves to plot")
    path = Path(path)
    robots = sorted({c.robot for c in curves})
    colors = {r: f"C{i % 10}" for i, r in enumerate(robots)}
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
        for k, ax in enumerate(axes.flat):
            for c in curves:
                u = np.array([row.update for row in c.rows], dtype=float)
                m = np.array([row.mean[k] for row in c.rows])
                s = np.array([row.std[k] for row in c.rows])
                if u.size == 1:
                    # a single update still gets a visible band
                    u = np.array([u[0] - 0.5, u[0] + 0.5])
                    m, s = np.repeat(m, 2), np.repeat(s, 2)
                ax.fill_between(u, m - s, m + s, color=colors[c.robot], alpha=0.08, linewidth=0)
                ax.plot(u, m, color=colors[c.robot], linewidth=0.8)
            ax.set_ylabel(PARAM_LABELS[k])
            ax.set_ylim(-1.6, 1.6)
        for ax in axes[-1]:
            ax.set_xlabel("policy update")
        handles = [plt.Line2D([], [], color=colors[r], label=f"robot {r}") for r in robots]
        fig.legend(handles=handles, loc="upper center", ncol=len(robots), frameon=False)
        _save(fig, path)
    return path


def plot_rewards(curves: Sequence, path) -> Path:
    """Per-robot Gaussian fitted to the runs' final-batch mean rewards."""
    if not curves:
        raise ValueError("no curves to plot")
    path = Path(path)
    by_robot = {}
    for c in curves:
        by_robot.setdefault(c.robot, []).append(c.rows[-1].batch_reward_mean)
    stats = {}
    for r, vals in sorted(by_robot.items()):
        v = np.asarray(vals, dtype=float)
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        stats[r] = (float(np.mean(v)), sd)
    lo = min(m - 4 * max(s, 1e-3) for m, s in stats.values())
    hi = max(m + 4 * max(s, 1e-3) for m, s in stats.values())
    x = np.linspace(lo, hi, 600)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        for i, (r, (m, s)) in enumerate(stats.items()):
            color = f"C{i % 10}"
            if s > 0:
                y = np.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
                ax.plot(x, y, color=color, label=f"robot {r}: {m:.4g} +/- {s:.2g}")
                ax.fill_between(x, 0, y, color=color, alpha=0.15, linewidth=0)
            else:
                ax.axvline(m, color=color, label=f"robot {r}: {m:.4g} (single value)")
        ax.set_xlabel("final-batch mean reward")
        ax.set_ylabel("density")
        ax.legend(frameon=False)
        _save(fig, path)
    return path


def emit_plots(curves: Sequence, summary, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [plot_parameters(curves, out / "parameters.svg"), plot_rewards(curves, out / "rewards.svg")]
