"""Matplotlib figures for the experiment reports (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or version strings in the files, so reruns are byte-stable
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata=_META)
    plt.close(fig)


def plot_error_curves(curves: dict, path, title: str = "", log: bool = True) -> None:
    """One line per entry of ``curves``: ``label -> IterationLog``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, lg in curves.items():
        ax.plot(lg.steps, lg.rel_error, marker="o", ms=2.5, lw=1, label=label)
    if log:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_gamma_sweep(rows, path, steps=(10, 30, 50), title: str = "") -> None:
    """log10 error against gamma at the given iteration counts.

    ``rows`` are ``(gamma, step, log10_rel_error)`` triples; non-finite
    values (diverged runs) are left out.
    """
    rows = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    markers = ["s", "D", "o", "^", "v"]
    for i, k in enumerate(steps):
        sel = (rows[:, 1] == k) & np.isfinite(rows[:, 2])
        if sel.any():
            ax.plot(rows[sel, 0], rows[sel, 2], marker=markers[i % len(markers)], lw=1,
                    label=f"{int(k)} iterations")
    ax.set_xlabel("gamma")
    ax.set_ylabel("log10 relative error")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=7)
    _save(fig, path)


def plot_field(field, path, title: str = "", extent=(-1, 1, -1, 1), vmin=None, vmax=None) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(field, origin="lower", extent=extent, cmap="gray", vmin=vmin, vmax=vmax)
    fig.colorbar(im, ax=ax, fraction=0.046)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_fields(fields: dict, path, extent=(-1, 1, -1, 1), share_scale: bool = True) -> None:
    """Side-by-side images, e.g. truth and reconstructions."""
    n = len(fields)
    fig, axes = plt.subplots(1, n, figsize=(3.6 * n, 3.4), squeeze=False)
    vals = list(fields.values())
    lo = min(float(np.min(v)) for v in vals) if share_scale else None
    hi = max(float(np.max(v)) for v in vals) if share_scale else None
    for ax, (label, f) in zip(axes[0], fields.items()):
        ax.imshow(f, origin="lower", extent=extent, cmap="gray", vmin=lo, vmax=hi)
        ax.set_title(label, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    _save(fig, path)


def plot_spectrum(eigenvalues, path, spectrum=None, title: str = "") -> None:
    """Eigenvalues (left axis, log) and optionally a power spectrum (right axis, log)."""
    lam = np.asarray(eigenvalues)
    idx = np.arange(1, lam.size + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(idx, np.maximum(np.abs(lam), 1e-18), "k-", lw=1.2, label="|eigenvalue|")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    if spectrum is not None:
        ax2 = ax.twinx()
        ax2.semilogy(idx, np.maximum(np.asarray(spectrum), 1e-30), color="tab:red", lw=0.6,
                     alpha=0.8, label="power spectrum")
        ax2.set_ylabel("squared coefficient")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_gn(lambdas, curves: dict, path, title: str = "") -> None:
    """``g_N`` curves: ``label -> values`` on a shared lambda axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, vals in curves.items():
        ax.plot(lambdas, vals, lw=1, label=label)
    ax.set_xlabel("lambda")
    ax.set_ylabel("g_N(lambda)")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    _save(fig, path)
