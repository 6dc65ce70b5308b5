"""Matplotlib rendering of run artifacts to image files.

Snapshot panels reproduce the invasion-sequence look (grayscale density,
obstacle hole black); the history plot tracks the per-step extrema, and the
profile plot shows a computed front.  All renderers write files and never
open interactive windows.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_snapshot_panels(trajectory, path, ncols: int = 4):
    """Grid of grayscale snapshot panels titled by time."""
    snaps = trajectory.snapshots
    n = len(snaps)
    ncols = min(ncols, max(1, n))
    nrows = int(np.ceil(n / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.0 * ncols, 3.0 * nrows),
                             squeeze=False)
    for ax in axes.ravel():
        ax.set_axis_off()
    for ax, (t, fld) in zip(axes.ravel(), snaps):
        grid = fld.grid
        img = np.where(grid.mask, np.clip(fld.values, 0.0, 1.0), 0.0)
        L = grid.halfwidth
        ax.imshow(img, origin="lower", cmap="gray", vmin=0.0, vmax=1.0,
                  extent=(-L, L, -L, L), interpolation="nearest")
        ax.set_title(f"t = {t:g}", fontsize=10)
        ax.set_axis_on()
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_history(trajectory, path):
    """Per-step exterior min/max and the steady-state residual."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    t = trajectory.times
    if t.size:
        ax1.plot(t, trajectory.min_history, label="min u", color="tab:blue")
        ax1.plot(t, trajectory.max_history, label="max u", color="tab:red")
        ax2.semilogy(t, np.maximum(trajectory.residual_history, 1e-300), color="tab:green")
    ax1.set_ylabel("exterior extrema")
    ax1.set_ylim(-0.02, 1.02)
    ax1.legend(loc="lower right", fontsize=9)
    ax2.set_ylabel("residual")
    ax2.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_wave_profile(profile, path):
    """Front profile with the speed and residual annotated."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(profile.z, profile.phi, color="tab:blue")
    ax.axhline(0.5, color="gray", lw=0.5, ls="--")
    ax.set_xlabel("z")
    ax.set_ylabel("phi")
    ax.set_title(f"s = {profile.s:g}: c = {profile.speed_c:.6f}, "
                 f"residual = {profile.residual_norm:.2e}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
