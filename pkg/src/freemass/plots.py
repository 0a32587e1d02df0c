"""Figure rendering for the CLI report paths.

Each function takes ready-made data, writes one PNG next to the
delimited output, and returns the path.  Uses the Agg backend so runs
stay headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 150


def save_variance_curve(path, times, variances, contraction_time=None,
                        grid_check=None):
    """Position variance against free-evolution time."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(times, variances, label="closed form")
    if grid_check is not None:
        ax.plot(times, grid_check, "x", ms=4, label="grid propagation")
    if contraction_time is not None:
        ax.axvline(contraction_time, color="gray", ls="--", lw=0.8,
                   label="contraction time")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\Delta x(t)^2$")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_sweep(path, rows):
    """SQL ratio against the twist, with the breach law for reference."""
    xi = np.array([r.xi for r in rows])
    ratio = np.array([r.sql_ratio for r in rows])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    order = np.argsort(xi)
    ax.loglog(xi[order], ratio[order], "o-", label="measured")
    ax.loglog(xi[order], 1.0 / (4.0 * xi[order]), ":", label=r"$1/4\xi$")
    ax.axhline(1.0, color="gray", lw=0.8, label="standard quantum limit")
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel("predictive variance / SQL")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_readout_histogram(path, readouts, bins, density_x=None, density_y=None):
    """First-readout histogram with the analytic density overlaid."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(readouts, bins=bins, density=True, alpha=0.6, label="trials")
    if density_x is not None:
        ax.plot(density_x, density_y, lw=1.2, label="analytic density")
    ax.set_xlabel("first readout")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_predictive_profile(path, readouts, posterior_variance, precision_sq,
                            sql_bound, mask=None):
    """Per-readout decomposition of the squared predictive uncertainty."""
    readouts = np.asarray(readouts)
    total = np.asarray(posterior_variance) + precision_sq
    if mask is None:
        mask = np.isfinite(total)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(readouts[mask], total[mask], label=r"$\Delta(\tau,\psi,a)^2$")
    ax.plot(readouts[mask], np.asarray(posterior_variance)[mask], "--",
            label="posterior variance term")
    ax.axhline(precision_sq, color="C2", ls=":", label="precision term")
    ax.axhline(sql_bound, color="gray", lw=0.8, label=r"$\hbar\tau/m$")
    ax.set_xlabel("readout a")
    ax.set_ylabel("variance")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
