"""Figure rendering for the CLI report paths.

Every renderer writes a PNG next to the delimited output.  matplotlib is
used with the Agg backend so the CLI never needs a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

VARIANT_STYLES = {
    0: dict(label="interference, no filter", color="tab:blue", ls="-"),
    1: dict(label="interference, filtered", color="tab:red", ls=":"),
    2: dict(label="clean, no filter", color="tab:green", ls="-."),
    3: dict(label="clean, filtered", color="tab:orange", ls="--"),
}


def render_trajectory(traj, out_path: Path, i_c: float) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(traj.n, traj.i_p, "o-", ms=3, label="peak current")
    ax.plot(traj.n, traj.i_v, "s-", ms=3, label="valley current")
    ax.axhline(i_c, color="k", lw=0.8, ls="--", label="command")
    ax.set_xlabel("cycle")
    ax.set_ylabel("current [A]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_waveforms(variants, out_path: Path, i_c: float) -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    for vid, wf in variants:
        style = VARIANT_STYLES[vid]
        ax.plot(wf.t, wf.y_filter, lw=1.0, **style)
    ax.axhline(i_c, color="k", lw=0.8, ls="--")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("current-sense output [A]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_root_locus(filtered: Sequence[tuple[float, float]],
                      unfiltered: Sequence[tuple[float, float]],
                      out_path: Path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, data, title in ((axes[0], unfiltered, "without filter"),
                            (axes[1], filtered, "with filter")):
        poles = np.array([p for _, p in data])
        kappas = np.array([k for k, _ in data])
        ax.plot(poles, np.zeros_like(poles), "x", color="tab:blue", ms=5)
        sc = ax.scatter(poles, np.zeros_like(poles), c=kappas, s=12,
                        cmap="viridis")
        circle = plt.Circle((0.0, 0.0), 1.0, fill=False, color="gray",
                            lw=0.8)
        ax.add_patch(circle)
        ax.axhline(0.0, color="gray", lw=0.5)
        ax.set_xlim(-1.5, 1.5)
        ax.set_ylim(-1.2, 1.2)
        ax.set_aspect("equal")
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("Re")
    axes[0].set_ylabel("Im")
    fig.colorbar(sc, ax=axes, label="feedback gain", shrink=0.8)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


_VERDICT_LEVELS = {"stable": 2, "inconclusive": 1, "unstable": 0}


def render_sweep_map(points, out_path: Path) -> Path:
    """Stability-region maps: one (amplitude, frequency) panel per tau."""
    tau_vals = sorted({p.tau_hat for p in points})
    a_vals = sorted({p.a_hat for p in points})
    w_vals = sorted({p.omega_hat for p in points})
    n = len(tau_vals)
    ncols = min(4, n)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(3.2 * ncols, 2.8 * nrows),
                             squeeze=False)
    a_idx = {v: i for i, v in enumerate(a_vals)}
    w_idx = {v: i for i, v in enumerate(w_vals)}
    cmap = matplotlib.colors.ListedColormap(
        ["#d62728", "#ffbf00", "#2ca02c"])
    for k, tau_hat in enumerate(tau_vals):
        ax = axes[k // ncols][k % ncols]
        grid = np.full((len(a_vals), len(w_vals)), np.nan)
        thm = np.zeros_like(grid, dtype=bool)
        for p in points:
            if p.tau_hat == tau_hat:
                grid[a_idx[p.a_hat], w_idx[p.omega_hat]] = \
                    _VERDICT_LEVELS[p.sim_verdict]
                thm[a_idx[p.a_hat], w_idx[p.omega_hat]] = p.thm_pass
        ax.imshow(grid, origin="lower", aspect="auto", cmap=cmap,
                  vmin=0, vmax=2,
                  extent=(min(w_vals), max(w_vals), min(a_vals),
                          max(a_vals)))
        yy, xx = np.where(thm)
        if yy.size:
            ax.plot(np.array(w_vals)[xx], np.array(a_vals)[yy], "k.",
                    ms=3)
        ax.set_title(f"tau_hat = {tau_hat:g}", fontsize=8)
        ax.set_xlabel("omega_hat")
        ax.set_ylabel("a_hat")
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.suptitle("simulated verdict (green=stable, amber=inconclusive, "
                 "red=unstable); dots mark criterion-passing points",
                 fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
