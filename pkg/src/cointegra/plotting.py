"""Figures written next to the CSV artifacts.

Every figure has two forms: a gnuplot script that reads the CSV, and a PNG
rendered with matplotlib's Agg backend.  PNG metadata is stripped so that
identical inputs give identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
}

_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def variance_gnuplot(csv_name: str, labels, png_name: str = "variance_gnuplot.png") -> str:
    """Gnuplot script plotting one variance curve per direction label."""
    lines = [
        "# variance profiles; run with: gnuplot variance.gp",
        "set datafile separator ','",
        "set key top left",
        "set xlabel 't'",
        "set ylabel 'Var(gamma^T (X_t - X_0))'",
        "set terminal pngcairo size 800,500",
        f"set output '{png_name}'",
    ]
    plots = [
        f"'{csv_name}' using 1:($2 == {i} ? $3 : 1/0) with lines title '{label}'"
        for i, label in enumerate(labels)
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def variance_png(path, times, profiles: dict, slopes: dict | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, var in profiles.items():
            text = label if not slopes else f"{label} (slope {slopes[label]:.3f})"
            ax.plot(times, var, label=text)
        ax.set_xlabel("t")
        ax.set_ylabel(r"Var$(\gamma^\top(X_t - X_0))$")
        ax.legend(loc="upper left")
        return _save(fig, Path(path))


def kernel_gnuplot(csv_name: str, dim: int, png_name: str = "kernel_gnuplot.png") -> str:
    n2 = dim * dim
    lines = [
        "# Granger kernels; run with: gnuplot kernel.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 't'",
        "set terminal pngcairo size 900,600",
        f"set output '{png_name}'",
        "set multiplot layout 1,3",
    ]
    for block, name in enumerate(("Ctilde", "C", "f")):
        cols = ", ".join(f"'{csv_name}' using 1:{2 + block * n2 + k} with lines" for k in range(n2))
        lines.append(f"set title '{name}'")
        lines.append("plot " + cols)
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def kernel_png(path, kernel) -> Path:
    n = kernel.dim
    t = kernel.times
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.6, 3.2), sharex=True)
        for ax, (name, series) in zip(axes, (("C~", kernel.c_tilde), ("C", kernel.c), ("f", kernel.f))):
            for i in range(n):
                for j in range(n):
                    ax.plot(t, series[:, i, j], label=f"{i + 1}{j + 1}")
            ax.set_title(name)
            ax.set_xlabel("t")
        axes[0].legend(loc="best")
        fig.tight_layout()
        return _save(fig, Path(path))


def paths_png(path, ensemble, limit: int = 5) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for p in ensemble[:limit]:
            for i in range(p.X.shape[1]):
                ax.plot(p.times, p.X[:, i], alpha=0.8, label=f"path {p.path_id}, X_{i + 1}")
        ax.set_xlabel("t")
        ax.set_ylabel("X")
        if limit <= 3:
            ax.legend(loc="best")
        return _save(fig, Path(path))


def roots_png(path, roots, step: float) -> Path:
    mu = np.array([r["mu"] for r in roots], dtype=complex)
    mapped = np.exp(step * np.array([r["s"] for r in roots], dtype=complex))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        th = np.linspace(0, 2 * np.pi, 400)
        ax.plot(np.cos(th), np.sin(th), color="0.6", linewidth=0.8)
        ax.plot(mu.real, mu.imag, "o", mfc="none", label="companion eigenvalues")
        ax.plot(mapped.real, mapped.imag, "x", label="exp(step s)")
        ax.set_aspect("equal")
        ax.legend(loc="lower left")
        return _save(fig, Path(path))
