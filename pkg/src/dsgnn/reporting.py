"""Figure rendering for train and bench reports (written next to the
delimited outputs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STRATEGY_COLORS = {"dual": "tab:blue", "single": "tab:red"}


def save_training_curve(report, path) -> None:
    """Train/validation MAE per epoch on a log scale."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    epochs = np.arange(1, len(report.train_mae) + 1)
    ax.plot(epochs, report.train_mae, label="train MAE", color="tab:blue")
    if report.valid_mae:
        ax.plot(epochs, report.valid_mae, label="valid MAE", color="tab:orange")
    if report.best_epoch:
        ax.axvline(report.best_epoch, color="gray", ls=":", lw=1, label="best epoch")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MAE")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bench_figures(records, summary, out_dir) -> list:
    """Angle volume growth (log-log with fits) and inference timings."""
    paths = []

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for strategy in ("dual", "single"):
        rs = [r for r in records if r.strategy == strategy and r.num_angles > 0]
        x = np.array([r.m_avg for r in rs])
        y = np.array([r.num_angles for r in rs])
        ax.scatter(x, y, s=18, alpha=0.7, color=_STRATEGY_COLORS[strategy], label=strategy)
        fit = summary["angle_growth"][strategy]
        if fit.get("exponent") is not None:
            grid = np.linspace(x.min(), x.max(), 50)
            ax.plot(grid, np.exp(fit["intercept"]) * grid ** fit["exponent"],
                    color=_STRATEGY_COLORS[strategy], lw=1,
                    label=f"{strategy} fit: slope {fit['exponent']:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mean edge neighbors per atom")
    ax.set_ylabel("total vertex angles")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = out_dir / "angle_growth.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for strategy in ("dual", "single"):
        rs = sorted((r for r in records if r.strategy == strategy),
                    key=lambda r: r.num_angles)
        ax.plot([r.num_angles for r in rs], [r.inference_ms for r in rs],
                "o-", ms=3, lw=0.8, color=_STRATEGY_COLORS[strategy], label=strategy)
    ax.set_xlabel("total vertex angles")
    ax.set_ylabel("median inference time (ms)")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out_dir / "inference_time.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths
