"""Figure rendering for CLI reports; written next to the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_bands(bands, path):
    """Band diagram lambda_n(theta) with the gap interval shaded."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    th = np.array([t[0] for t in bands.thetas])
    order = np.argsort(th)
    for j in range(bands.bands.shape[1]):
        ax.plot(th[order], bands.bands[order, j], "-o", ms=2.5, lw=1)
    lo, hi = bands.gap
    if np.isfinite(lo) and np.isfinite(hi):
        ax.axhspan(lo, hi, color="0.9", zorder=0)
    ax.axhline(bands.a, color="k", ls=":", lw=0.8)
    ax.axhline(-bands.a, color="k", ls=":", lw=0.8)
    ax.set_xlabel(r"$\theta$")
    ax.set_ylabel(r"$\lambda_n(\theta)$")
    ax.set_title("Bloch bands" + ("" if bands.dim == 1 else " (slice)"))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_state(state, closure, path):
    """Component amplitudes of a bound state along the unrolled closure."""
    f = state.field
    grid = f.grid
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    x0 = 0.0
    for e in range(grid.graph.num_edges):
        ids = grid.node_ids[e]
        xs = x0 + grid.node_x(e)
        xm = x0 + grid.mid_x(e)
        ax1.plot(xs, np.abs(f.u1[ids]), "-", color="C0", lw=1)
        ax2.plot(xm, np.abs(f.u2[grid.mids(e)]), "-", color="C1", lw=1)
        x0 += grid.graph.edges[e].length
    ax1.set_ylabel(r"$|u^1|$")
    ax2.set_ylabel(r"$|u^2|$")
    ax2.set_xlabel("arclength (edges concatenated)")
    ax1.set_title(
        f"bound state: residual {state.residual:.2e}, action {state.action:.6g}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cutoff(records, path):
    """Decay of |v'|^2 with the number of cells, log-log with 1/N guide."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    Ns = np.array([r["N"] for r in records], dtype=float)
    ds = np.array([r["v_prime_sq"] for r in records])
    ax.loglog(Ns, ds, "o-", label=r"$|v_N'|_2^2$")
    ax.loglog(Ns, ds[0] * Ns[0] / Ns, "k:", label=r"$\propto 1/N$")
    ax.set_xlabel("N (cells)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_linking(report, path):
    """Sampled min of the action over positive-subspace spheres vs radius."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    rho = np.array(report["rho_grid"])
    vals = np.array(report["min_phi_per_rho"])
    ax.plot(rho, vals, "o-")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.axvline(report["rho"], color="C3", ls="--", lw=0.8, label=rf"$\rho={report['rho']:.3g}$")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\rho$")
    ax.set_ylabel(r"sampled $\min \Phi$ on the $Y^+$ sphere")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
