"""Figures rendered next to the CSV/JSON reports.

Every function takes plain arrays, writes one file and closes its figure.
The Agg backend is selected so this works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 120,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def pulse(t, omega_mhz, delta_mhz, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(5, 4))
        ax1.plot(t, omega_mhz, color="C0")
        ax1.set_ylabel(r"$\Omega/2\pi$ (MHz)")
        ax2.plot(t, delta_mhz, color="C3")
        ax2.set_ylabel(r"$\Delta/2\pi$ (MHz)")
        ax2.set_xlabel(r"$t$ ($\mu$s)")
        return _save(fig, path)


def trajectory(times, n_exc, p_decay, path, overlap=None):
    with plt.rc_context(STYLE):
        rows = 3 if overlap is not None else 2
        fig, axes = plt.subplots(rows, 1, sharex=True, figsize=(5, 1.6 * rows + 0.6))
        axes[0].plot(times, n_exc)
        axes[0].set_ylabel(r"$\langle N_e \rangle$")
        axes[1].plot(times, p_decay, color="C2")
        axes[1].set_ylabel(r"$P_d$")
        if overlap is not None:
            axes[2].plot(times, overlap, color="C4")
            axes[2].set_ylabel("ground overlap")
            axes[2].set_ylim(-0.02, 1.02)
        axes[-1].set_xlabel(r"$t$ ($\mu$s)")
        return _save(fig, path)


def convergence(evals, fom, incumbent, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.semilogy(evals, np.maximum(fom, 1e-16), ".", ms=2, alpha=0.4, label="evaluations")
        ax.semilogy(evals, np.maximum(incumbent, 1e-16), color="k", label="incumbent")
        ax.set_xlabel("function evaluation")
        ax.set_ylabel("FoM (infidelity)")
        ax.legend()
        return _save(fig, path)


def bars(x, y, xlabel, ylabel, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.bar(x, y, color="C0")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def spectrum(deltas, energies, n_exc, path, marks=()):
    """Classical levels vs detuning, colored by excitation number."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        cmap = plt.get_cmap("viridis", int(n_exc.max()) + 1)
        for k in range(energies.shape[1]):
            ax.plot(deltas, energies[:, k], color=cmap(int(n_exc[k])), lw=0.7)
        for m in marks:
            ax.axvline(m, color="k", ls="--", lw=0.8)
        sm = plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(-0.5, n_exc.max() + 0.5))
        fig.colorbar(sm, ax=ax, label=r"$N_e$")
        ax.set_xlabel(r"$\Delta / V_L$")
        ax.set_ylabel(r"$E / V_L$")
        return _save(fig, path)


def staircase(lengths, mean_n_exc, classical, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(lengths, mean_n_exc, "o-", label="pulse")
        ax.step(lengths, classical, where="mid", color="k", label="classical ground state")
        ax.set_xlabel(r"$N$")
        ax.set_ylabel(r"$N_e$")
        ax.legend()
        return _save(fig, path)


def detection(times, excitation, reference, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(5, 4))
        ax1.plot(times, excitation, label="prepared")
        ax1.plot(times, reference, "--", label="GHZ reference")
        ax1.set_ylabel("single-unit excitation")
        ax1.legend()
        ax2.plot(times, excitation - reference, color="C3")
        ax2.set_ylabel(r"$D_t$")
        ax2.set_xlabel(r"$t$ ($\mu$s)")
        return _save(fig, path)


def heatmap(x, y, z, xlabel, ylabel, zlabel, path, point=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        mesh = ax.pcolormesh(x, y, z, shading="auto", cmap="magma")
        fig.colorbar(mesh, ax=ax, label=zlabel)
        if point is not None:
            ax.plot(*point, "c*", ms=8)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def matrix(mat, labels, path, title=""):
    """Real and imaginary parts of a (density) matrix side by side."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(7, 3.3))
        lim = max(np.abs(mat).max(), 1e-12)
        for ax, part, name in zip(axes, (mat.real, mat.imag), ("Re", "Im")):
            im = ax.imshow(part, cmap="RdBu_r", vmin=-lim, vmax=lim)
            ax.set_title(f"{name} {title}".strip())
            ticks = np.arange(len(labels))
            if len(labels) <= 20:
                ax.set_xticks(ticks, labels, rotation=90)
                ax.set_yticks(ticks, labels)
        fig.colorbar(im, ax=axes, shrink=0.8)
        fig.savefig(path)
        plt.close(fig)
        return path
