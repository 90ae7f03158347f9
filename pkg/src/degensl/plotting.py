"""Report figures.  Rendered with the Agg backend and written without metadata."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "degensl",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _figure(**kw):
    with plt.rc_context(STYLE):
        return plt.subplots(**kw)


def plot_fundamental(x, c, s, mu, path) -> Path:
    fig, ax = _figure()
    ax.plot(x, c.real, label="Re c")
    ax.plot(x, s.real, label="Re s")
    if np.any(c.imag) or np.any(s.imag):
        ax.plot(x, c.imag, "--", label="Im c")
        ax.plot(x, s.imag, "--", label="Im s")
    ax.set_xlabel("x")
    ax.set_title(f"fundamental system, mu = {complex(mu):.4g}")
    ax.legend()
    return _save(fig, path)


def plot_det_scan(re, im, values, path, label="Delta") -> Path:
    fig, ax = _figure()
    mag = np.abs(values)
    with np.errstate(divide="ignore"):
        logmag = np.log10(np.where(mag > 0, mag, np.nan))
    if im.size == 1:
        ax.plot(re, logmag[0])
        ax.set_xlabel("Re mu")
        ax.set_ylabel(f"log10 |{label}|")
    else:
        mesh = ax.pcolormesh(re, im, logmag, shading="auto", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label=f"log10 |{label}|")
        ax.set_xlabel("Re mu")
        ax.set_ylabel("Im mu")
    return _save(fig, path)


def plot_zeros(points, region, path) -> Path:
    fig, ax = _figure()
    mus = np.array([p.mu for p in points], dtype=complex)
    mult = np.array([p.multiplicity for p in points])
    if mus.size:
        ax.scatter(mus.real, mus.imag, s=18 * mult, marker="x")
    ax.set_xlim(region.re_min, region.re_max)
    ax.set_ylim(region.im_min, region.im_max)
    ax.set_xlabel("Re mu")
    ax.set_ylabel("Im mu")
    ax.set_title(f"{mus.size} zeros")
    return _save(fig, path)


def plot_potential(x, q, path, title="reconstructed potential") -> Path:
    fig, ax = _figure()
    ax.plot(x, q.real, label="Re q")
    if np.any(q.imag):
        ax.plot(x, q.imag, "--", label="Im q")
    ax.set_xlabel("x")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_residuals(mu, residual, path) -> Path:
    fig, ax = _figure()
    ax.semilogy(mu, np.maximum(np.abs(residual), 1e-300), ".-")
    ax.set_xlabel("mu")
    ax.set_ylabel("|Delta_hat - v|")
    return _save(fig, path)


def plot_norms(n, norms, path) -> Path:
    fig, ax = _figure()
    ax.plot(n, norms, "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("projection norm")
    return _save(fig, path)


def plot_green(x, values, path) -> Path:
    fig, ax = _figure()
    step = max(1, x.size // 257)
    mesh = ax.pcolormesh(x[::step], x[::step], np.abs(values[::step, ::step]), shading="auto", cmap="magma")
    fig.colorbar(mesh, ax=ax, label="|G|")
    ax.set_xlabel("xi")
    ax.set_ylabel("x")
    return _save(fig, path)


def plot_symmetry(x, q, path) -> Path:
    fig, ax = _figure()
    ax.plot(x, q.real, label="Re q(x)")
    ax.plot(x, q[::-1].real, "--", label="Re q(pi - x)")
    ax.set_xlabel("x")
    ax.legend()
    return _save(fig, path)
