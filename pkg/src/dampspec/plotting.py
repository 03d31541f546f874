"""Figures written next to the CSV/JSON output (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_eigencurves", "plot_spectrum", "plot_trace"]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_eigencurves(table, alphas: Sequence[float], path, records_by_alpha: dict | None = None, ylim=None) -> Path:
    """Eigencurves, the essential row and the parabolas ``-(mu/alpha)^2``."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    mu = table.mu_samples
    for n in range(table.k):
        ax.plot(mu, table.curves[n], lw=1.0, color="C0", alpha=0.8, label="eigencurves" if n == 0 else None)
    if table.essential_row is not None and np.all(np.isfinite(table.essential_row)):
        ax.plot(mu, table.essential_row, "k--", lw=1.0, label=r"$\gamma_\infty$ estimate")
    for i, alpha in enumerate(alphas):
        if alpha > 0:
            ax.plot(mu, -(mu / alpha) ** 2, color=f"C{i + 1}", lw=1.2, label=rf"$-(\mu/\alpha)^2$, $\alpha={alpha:g}$")
        for r in (records_by_alpha or {}).get(alpha, ()):
            if r.kind in ("transversal", "tangency"):
                ax.plot(r.mu_star, -(r.lam**2), "o", ms=4, color=f"C{i + 1}")
    if ylim is None:
        lo = float(np.min(table.curves[0]))
        hi = float(np.max(table.curves[: min(table.k, 4)]))
        pad = 0.1 * (hi - lo + 1.0)
        ylim = (lo - pad, hi + pad)
    ax.set_ylim(*ylim)
    ax.set_xlabel(r"$\mu$")
    ax.set_ylabel(r"$\gamma_n(\mu)$")
    ax.axhline(0, color="0.7", lw=0.6)
    ax.legend(fontsize=8, loc="best")
    return _save(fig, path)


def plot_spectrum(report, path, window=None) -> Path:
    """Block-operator eigenvalues in the complex plane; real ones highlighted."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ev = report.eigenvalues
    ax.plot(ev.real[~report.real_mask], ev.imag[~report.real_mask], ".", ms=3, color="0.5", label="complex")
    ax.plot(report.real_eigenvalues, np.zeros_like(report.real_eigenvalues), "o", ms=5, mfc="none", color="C3", label="real")
    if window is not None:
        ax.set_xlim(*window)
        ax.set_ylim(*window)
    ax.axvline(0, color="0.7", lw=0.6)
    ax.set_xlabel(r"Re $\lambda$")
    ax.set_ylabel(r"Im $\lambda$")
    ax.set_title(rf"$\alpha = {report.alpha:g}$ ({report.mode})")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_trace(trace, path, reference_rate: float | None = None, omega: float | None = None) -> Path:
    """``log ||Psi(t)||_H`` with optional reference slopes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    t, y = trace.times, trace.log_norms
    ax.plot(t, y, lw=1.2, label=r"$\log\|\Psi(t)\|_H$")
    if reference_rate is not None:
        ax.plot(t, y[-1] + reference_rate * (t - t[-1]), "--", lw=1.0, label=rf"slope {reference_rate:.4g}")
    if omega is not None:
        ax.plot(t, y[0] + omega * t, ":", lw=1.0, color="k", label=rf"$\omega_\alpha t$, $\omega_\alpha={omega:g}$")
        ax.set_ylim(min(y.min(), y[0]) - 1, max(y.max(), y[0]) + 0.2 * (y.max() - y[0]) + 1)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    return _save(fig, path)
