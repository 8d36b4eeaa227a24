"""The four plot kinds: field contours, energy profile, operator heatmap,
convergence study."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import (SchemaError, read_coordinate_matrix, read_delimited,
                 read_labeled_delimited)


def render_field(path, out, title=None):
    cols, meta = read_delimited(path, ("y", "z", "v", "psi"))
    y = np.unique(cols["y"])
    z = np.unique(cols["z"])
    if len(y) * len(z) != len(cols["v"]):
        raise SchemaError(f"{path}: rows do not fill a tensor grid")
    v = cols["v"].reshape(len(y), len(z))
    psi = cols["psi"].reshape(len(y), len(z))

    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, data, name in ((axes[0], v, "v"), (axes[1], psi, "psi")):
        span = np.abs(data).max()
        if span == 0.0:
            span = 1.0
        cs = ax.contourf(z, y, data, levels=21, cmap="RdBu_r",
                         vmin=-span, vmax=span)
        ax.set_xlabel("z")
        ax.set_title(name)
        fig.colorbar(cs, ax=ax, shrink=0.9)
    axes[0].set_ylabel("y")
    if title or meta.get("case"):
        fig.suptitle(title or f"case {meta.get('case')}")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def render_energy(path, out, title=None):
    cols, meta = read_delimited(path, ("z", "E", "dE_fd", "dE_rhs"))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(cols["z"], cols["E"], "k-", lw=1.5)
    ax1.set_ylabel("E(Z)")
    ax1.grid(alpha=0.3)
    ax2.plot(cols["z"], cols["dE_fd"], "C0-", lw=1.2, label="dE/dZ (finite diff)")
    ax2.plot(cols["z"], cols["dE_rhs"], "C3--", lw=1.2, label="identity RHS")
    ax2.axhline(0.0, color="0.6", lw=0.8)
    ax2.set_xlabel("Z")
    ax2.set_ylabel("dE/dZ")
    ax2.legend(fontsize=8)
    ax2.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def render_lambda(path, out, title=None):
    mat, meta = read_coordinate_matrix(path)
    span = np.abs(mat).max()
    if span == 0.0:
        span = 1.0
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(mat, cmap="RdBu_r", vmin=-span, vmax=span, origin="lower")
    ax.set_xlabel("v-trace node")
    ax.set_ylabel("psi-trace node")
    ax.set_title(title or f"transparent operator (H={meta.get('H', '?')})")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def render_convergence(path, out, title=None):
    cols, meta = read_labeled_delimited(path, ("n", "error"))
    labels = cols.get("label") or [""] * len(cols["n"])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for lab in dict.fromkeys(labels):
        mask = np.array([l == lab for l in labels])
        n = cols["n"][mask]
        err = cols["error"][mask]
        order = np.polyfit(np.log(1.0 / n), np.log(err), 1)[0] if len(n) > 1 else float("nan")
        ax.loglog(n, err, "o-", label=f"{lab or 'error'} (order {order:.2f})")
    n_ref = np.array([cols["n"].min(), cols["n"].max()], dtype=float)
    scale = cols["error"].max() * cols["n"].min() ** 2
    ax.loglog(n_ref, scale / n_ref**2, "k:", lw=0.8, label="second order")
    ax.set_xlabel("grid cells per direction")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


PLOT_KINDS = {
    "field": render_field,
    "energy": render_energy,
    "lambda": render_lambda,
    "convergence": render_convergence,
}


def render(kind, path, out, title=None):
    if kind not in PLOT_KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}; "
                          f"choose from {sorted(PLOT_KINDS)}")
    PLOT_KINDS[kind](path, out, title=title)
    return out
