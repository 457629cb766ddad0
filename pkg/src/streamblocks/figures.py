"""Figure rendering for the CLI report paths.

Everything here writes PNG files next to the delimited outputs; the
Agg backend is forced so rendering works headless. The library modules
never import this — only the CLI does.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def render_trace(trace: dict, out_path: str) -> None:
    """Objective and step-size evolution from a fit trace.

    `trace` holds the trace-CSV columns (window, n_events, eta,
    elbo_norm, loglik_norm) as arrays.
    """
    fig, (ax, ax_eta) = plt.subplots(
        2, 1, figsize=(7.0, 5.6), sharex=True, height_ratios=[2, 1]
    )
    w = trace["window"]
    ax.plot(w, trace["elbo_norm"], label="ELBO / |A|", color="tab:blue")
    ax.plot(
        w, trace["loglik_norm"], label="E[log-lik] / |A|", color="tab:orange", ls="--"
    )
    ax.set_ylabel("per-pair objective")
    ax.legend(loc="lower right", frameon=False)
    ax.grid(alpha=0.3)
    eta = np.asarray(trace["eta"], dtype=np.float64)
    if np.any(eta > 0):
        ax_eta.plot(w[eta > 0], eta[eta > 0], color="tab:green")
        ax_eta.set_yscale("log")
    ax_eta.set_ylabel("step size")
    ax_eta.set_xlabel("window")
    ax_eta.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)


def render_rate_matrices(
    B_hat: np.ndarray, out_path: str, B_true: np.ndarray | None = None
) -> None:
    """Heatmap of the fitted block-rate matrix, next to the truth if given."""
    mats = [("fitted", np.asarray(B_hat, dtype=np.float64))]
    if B_true is not None:
        mats.insert(0, ("true", np.asarray(B_true, dtype=np.float64)))
    vmax = max(float(mat.max()) for _, mat in mats)
    fig, axes = plt.subplots(
        1, len(mats), figsize=(3.6 * len(mats), 3.2), squeeze=False
    )
    for ax, (name, mat) in zip(axes[0], mats):
        im = ax.imshow(mat, vmin=0.0, vmax=vmax, cmap="viridis")
        ax.set_title(name)
        ax.set_xlabel("receiver class")
        ax.set_ylabel("sender class")
        ax.set_xticks(range(mat.shape[1]))
        ax.set_yticks(range(mat.shape[0]))
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)


def render_membership(tau: np.ndarray, out_path: str) -> None:
    """Responsibility matrix with nodes grouped by hard assignment."""
    tau = np.asarray(tau, dtype=np.float64)
    order = np.argsort(tau.argmax(axis=1), kind="stable")
    fig, ax = plt.subplots(figsize=(4.8, 5.6))
    im = ax.imshow(tau[order], aspect="auto", vmin=0.0, vmax=1.0, cmap="magma")
    ax.set_xlabel("class")
    ax.set_ylabel("node (grouped by assignment)")
    ax.set_xticks(range(tau.shape[1]))
    fig.colorbar(im, ax=ax, label="responsibility")
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)


def render_compare(rows: list, out_path: str) -> None:
    """Wall time and held-out RMSE bars for the online/batch comparison.

    `rows` holds (method, wall_time_s, link_rmse, loglik) tuples.
    """
    methods = [r[0] for r in rows]
    times = [r[1] for r in rows]
    rmses = [r[2] for r in rows]
    fig, (ax_t, ax_r) = plt.subplots(1, 2, figsize=(7.2, 3.2))
    x = np.arange(len(methods))
    ax_t.bar(x, times, color=["tab:blue", "tab:orange"][: len(methods)])
    ax_t.set_xticks(x, methods)
    ax_t.set_ylabel("wall time (s)")
    ax_t.grid(alpha=0.3, axis="y")
    ax_r.bar(x, rmses, color=["tab:blue", "tab:orange"][: len(methods)])
    ax_r.set_xticks(x, methods)
    ax_r.set_ylabel("held-out count RMSE")
    ax_r.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
