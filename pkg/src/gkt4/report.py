"""Render diagnostics CSV columns to figure files.

The CSV stays the canonical machine-readable output; these plots are the
human-readable companion written alongside it.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .flow import DiagnosticsRecord

plt.rcParams["figure.figsize"] = (6.4, 4.0)
plt.rcParams["font.size"] = 9
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def _column(records, name):
    idx = DiagnosticsRecord.CSV_FIELDS.index(name)
    return np.array([r.as_tuple()[idx] for r in records])


def render_figures(records, outdir: str, fmt: str = "png"):
    """Write decay, energy, and health figures; returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    t = _column(records, "t")
    written = []

    fig, ax = plt.subplots()
    for name, label in (
        ("sup_phi_dev", "sup |Phi - lambda|"),
        ("sup_grad_phi_sq", "sup |grad Phi|^2"),
        ("mu_l2", "||mu||_L2"),
        ("torsion_l2", "int |H|^2 dV"),
    ):
        y = _column(records, name)
        if np.any(y > 0):
            ax.semilogy(t, np.maximum(y, 1e-300), label=label)
        else:
            ax.plot(t, y, label=label)
    ax.set_xlabel("t")
    ax.set_title("decay diagnostics")
    ax.legend()
    path = os.path.join(outdir, f"decay.{fmt}")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.0))
    axes[0].plot(t, _column(records, "F_value"), label="F (path integral)")
    axes[0].set_title("Kempf-Ness functional")
    axes[0].legend()
    axes[1].plot(t, _column(records, "dF_dt"), label="d/dt sigma(0, Phi)")
    axes[1].plot(t, _column(records, "energy_rhs"), "--", label="energy identity rhs")
    axes[1].set_xlabel("t")
    axes[1].legend()
    path = os.path.join(outdir, f"energy.{fmt}")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(6.4, 7.0))
    axes[0].plot(t, _column(records, "pos_margin"))
    axes[0].set_title("positivity margin")
    axes[1].plot(t, _column(records, "heat_residual"))
    axes[1].set_title("heat residual")
    lam = _column(records, "lambda")
    axes[2].plot(t, lam - lam[0])
    axes[2].set_title("lambda drift")
    axes[2].set_xlabel("t")
    path = os.path.join(outdir, f"health.{fmt}")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
