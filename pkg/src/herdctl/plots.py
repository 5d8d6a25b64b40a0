"""Figure rendering for run and benchmark outputs.

Every function writes PNG files next to the delimited outputs and returns
the paths. Rendering always goes through the Agg backend so the CLI works
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .sim import RunRecord  # noqa: E402


def plot_run(record: RunRecord, out_dir, title: str = "") -> list:
    """Render the planar trajectories and the per-sample diagnostics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    m, n = record.m, record.n
    for j in range(m):
        px, py = record.x[:, 2 * j], record.x[:, 2 * j + 1]
        ax.plot(px, py, color="0.2", lw=1.2,
                label="evader" if j == 0 else None)
        ax.plot(px[0], py[0], marker="s", color="tab:green", ms=6)
        ax.plot(px[-1], py[-1], marker="o", color="0.2", ms=4)
        ax.plot(record.x_star[-1, 2 * j], record.x_star[-1, 2 * j + 1],
                marker="o", mfc="none", color="tab:red", ms=9,
                label="target" if j == 0 else None)
    for i in range(n):
        hx, hy = record.u[:, 2 * i], record.u[:, 2 * i + 1]
        ax.plot(hx, hy, color="tab:blue", lw=1.0, ls="--",
                label="herder" if i == 0 else None)
        ax.plot(hx[0], hy[0], marker="s", color="tab:green", ms=6)
        ax.plot(hx[-1], hy[-1], marker="p", color="tab:blue", ms=7)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = out / "trajectory.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.5), sharex=True)
    t = record.t
    ax = axes[0, 0]
    for j in range(m):
        ax.plot(t, record.x[:, 2 * j], color="0.2", lw=0.9)
        ax.plot(t, record.x[:, 2 * j + 1], color="0.5", lw=0.9)
        ax.plot(t, record.x_star[:, 2 * j], color="tab:red", lw=0.8, ls="--")
        ax.plot(t, record.x_star[:, 2 * j + 1], color="tab:orange", lw=0.8, ls="--")
    ax.set_ylabel("positions [m]")
    ax.grid(True, alpha=0.3)
    ax = axes[0, 1]
    ax.semilogy(t, record.error_norm, color="0.2")
    ax.set_ylabel("|x - x*| [m]")
    ax.grid(True, alpha=0.3)
    ax = axes[1, 0]
    ax.semilogy(t, record.eta, color="tab:blue")
    ax.set_ylabel("residual norm [m/s]")
    ax.set_xlabel("t [s]")
    ax.grid(True, alpha=0.3)
    ax = axes[1, 1]
    if record.controller == "implicit":
        ax.plot(t, record.iterations, color="tab:purple", lw=0.8)
        ax.set_ylabel("solver iterations")
    else:
        ax.semilogy(t, record.lyapunov, color="tab:purple", lw=0.8)
        ax.set_ylabel("V")
    ax.set_xlabel("t [s]")
    ax.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = out / "diagnostics.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def plot_action_difference(t, diff_norms, out_dir) -> Path:
    """Per-sample distance between the two designs' actions on one scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(t, diff_norms, color="0.2")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("|u_explicit - u_implicit| [m]")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out / "action_difference.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_bench(rows: list, out_dir) -> Path:
    """Mean iterations and residual against the sample time, log-log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ok = [r for r in rows if not r.get("failed")]
    ts = [r["T"] for r in ok]
    axes[0].loglog(ts, [r["k_mean"] for r in ok], marker="o", color="tab:blue")
    axes[0].set_xlabel("T [s]")
    axes[0].set_ylabel("mean iterations")
    axes[0].grid(True, which="both", alpha=0.3)
    axes[1].loglog(ts, [r["eta_mean"] for r in ok], marker="o", color="tab:red")
    axes[1].set_xlabel("T [s]")
    axes[1].set_ylabel("mean residual [m/s]")
    axes[1].grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = out / "bench.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
