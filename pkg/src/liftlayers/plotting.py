"""SVG figures for experiment outputs (matplotlib, non-interactive backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TWO_PI = 2.0 * np.pi


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_series(series, path) -> None:
    """Objective and RMSE against epoch, one line per series, log scale."""
    fig, (ax_obj, ax_rmse) = plt.subplots(1, 2, figsize=(9, 3.5))
    for s in series:
        e = np.maximum(s.epochs, 1)
        ax_obj.loglog(e, s.objectives, label=s.name)
        ax_rmse.loglog(e, s.rmses, label=s.name)
    ax_obj.set(xlabel="epoch", ylabel="training objective")
    ax_rmse.set(xlabel="epoch", ylabel="RMSE")
    ax_obj.legend()
    _save(fig, path)


def plot_fit1d(res, path) -> None:
    x = np.linspace(0.0, TWO_PI, 400)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, np.sin(x), "k:", label="sin")
    ax.plot(x, res.lift_net.predict(x).ravel(), label="lift net")
    ax.plot(x, res.std_net.predict(x).ravel(), label="std net")
    ax.plot(x, res.closed_form(x), "--", label="closed form")
    ax.plot(res.x, res.y, "k.", ms=4)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_fit2d(res, path) -> None:
    n = res.config.train_grid
    panels = [("target", res.targets)]
    from .simplex import grid_triangulation, lift_nd_many
    from .core import KnotSequence
    for v, theta in res.vector_theta.items():
        tri = grid_triangulation([KnotSequence.uniform(0.0, TWO_PI, v)] * 2)
        panels.append((f"{v}x{v} vertices", lift_nd_many(res.points, tri) @ theta[0]))
    fig, axes = plt.subplots(1, len(panels), figsize=(3.2 * len(panels), 3))
    for ax, (title, values) in zip(np.atleast_1d(axes), panels):
        ax.imshow(values.reshape(n, n).T, origin="lower", extent=(0, TWO_PI, 0, TWO_PI),
                  vmin=-1, vmax=1, cmap="viridis")
        ax.set_title(title, fontsize=9)
    _save(fig, path)


def plot_robust(res, path) -> None:
    from . import output_lifting as ol
    from .core import KnotSequence
    cfg = res.config
    kx = KnotSequence.uniform(0.0, 1.0, cfg.knots_x)
    ky = KnotSequence.uniform(*res.data.y_range, cfg.knots_y)
    x = np.linspace(0.0, 1.0, 400)
    fig, (ax, ax_c) = plt.subplots(1, 2, figsize=(9, 3.5))
    d = res.data
    ax.plot(d.x[~d.outliers], d.y[~d.outliers], "k.", ms=3)
    ax.plot(d.x[d.outliers], d.y[d.outliers], "r.", ms=3)
    ax.plot(x, d.ground_truth(x), "k:", label="ground truth")
    ax.plot(x, ol.lifted_predict(res.assignment, kx, ky, x), label="lifted")
    ax.plot(x, res.absolute_spline(x), label="L1 spline")
    for i, run in enumerate(res.nonconvex):
        ax.plot(kx.values, run.theta, lw=0.8, alpha=0.7, label=f"direct {i + 1}")
    ax.legend(fontsize=7)
    ax_c.imshow(res.cost.c, origin="lower", aspect="auto", extent=(0, 1, *res.data.y_range))
    ax_c.set(xlabel="x", ylabel="y", title="cost matrix")
    _save(fig, path)
