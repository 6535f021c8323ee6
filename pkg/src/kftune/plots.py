"""Report figures rendered next to the CSV artifacts."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .acquisition import SearchBox
from .consistency import ConsistencyRecord
from .gp_surrogate import grid_predictions
from .tuner import TuningSession


def plot_history(session: TuningSession, path) -> None:
    costs = np.array([y for _, y in session.history])
    incumbent = np.minimum.accumulate(costs)
    idx = np.arange(len(costs))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(idx, costs, "o", ms=4, alpha=0.6, label="evaluations")
    ax.step(idx, incumbent, where="post", color="tab:red", label="incumbent")
    ax.axvline(session.config.n_seed - 0.5, color="gray", ls=":", lw=1)
    ax.set_xlabel("evaluation")
    ax.set_ylabel("cost")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_surrogate(
    session: TuningSession,
    box: SearchBox,
    path,
    points_per_dim: int | None = None,
    truth: np.ndarray | None = None,
) -> bool:
    """GP mean (and 2-sigma band for 1-D designs) with the sampled points. Returns False if d > 2."""
    model = session.surrogate
    d = box.d
    if model is None or d > 2:
        return False
    names = [p.name for p in session.spec.parameters]
    q_hist = np.array([q for q, _ in session.history])
    y_hist = np.array([y for _, y in session.history])

    if d == 1:
        pts, mu, sigma = grid_predictions(model, box, points_per_dim or 201)
        x = pts[:, 0]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, mu, color="tab:blue", label="surrogate mean")
        ax.fill_between(x, mu - 2 * sigma, mu + 2 * sigma, color="tab:blue", alpha=0.2, label="2-sigma")
        ax.plot(q_hist[:, 0], y_hist, "k.", ms=6, label="samples")
        if truth is not None:
            ax.axvline(truth[0], color="tab:green", ls="--", lw=1, label="truth")
        ax.set_xlabel(names[0])
        ax.set_ylabel("cost")
        ax.legend(frameon=False)
    else:
        n_grid = points_per_dim or 61
        pts, mu, _ = grid_predictions(model, box, n_grid)
        xs = pts[:, 0].reshape(n_grid, n_grid)
        ys = pts[:, 1].reshape(n_grid, n_grid)
        zs = mu.reshape(n_grid, n_grid)
        fig, ax = plt.subplots(figsize=(6, 5))
        mesh = ax.pcolormesh(xs, ys, zs, shading="auto", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="surrogate mean cost")
        ax.plot(q_hist[:, 0], q_hist[:, 1], "w.", ms=5, label="samples")
        if truth is not None:
            ax.plot(truth[0], truth[1], "r*", ms=12, label="truth")
        ax.set_xlabel(names[0])
        ax.set_ylabel(names[1])
        ax.legend(frameon=False, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def plot_consistency(record: ConsistencyRecord, path) -> None:
    k = np.arange(1, record.avg_nees.shape[0] + 1)
    fig, (ax_nees, ax_nis) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for ax, avg, bounds, dof, label in (
        (ax_nees, record.avg_nees, record.bounds_nees, record.nx, "avg NEES"),
        (ax_nis, record.avg_nis, record.bounds_nis, record.nz, "avg NIS"),
    ):
        ax.plot(k, avg, lw=0.8, label=label)
        ax.axhline(bounds[0], color="tab:red", ls="--", lw=1)
        ax.axhline(bounds[1], color="tab:red", ls="--", lw=1, label=f"{100 * (1 - record.alpha):.0f}% bounds")
        ax.axhline(dof, color="gray", ls=":", lw=1)
        ax.set_ylabel(label)
        ax.legend(frameon=False, loc="upper right")
    ax_nis.set_xlabel("step k")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_session(
    session: TuningSession,
    record: ConsistencyRecord,
    box: SearchBox,
    out_dir,
    truth: np.ndarray | None = None,
) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    history_path = out_dir / "history.png"
    plot_history(session, history_path)
    written.append(history_path)
    surrogate_path = out_dir / "surrogate.png"
    if plot_surrogate(session, box, surrogate_path, truth=truth):
        written.append(surrogate_path)
    consistency_path = out_dir / "consistency.png"
    plot_consistency(record, consistency_path)
    written.append(consistency_path)
    return written
