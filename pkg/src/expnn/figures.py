"""Figure rendering for experiment reports and expectile curves.

Uses the Agg backend so rendering works without a display; every function
writes a file and returns its path.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_report_figure(report, path) -> str:
    """Mean train/test MSE per expectile level, one line per arm and split."""
    agg = report.aggregate()
    taus = [row["tau"] for row in agg]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(taus, [r["enn_test_mse"] for r in agg],
            marker="o", color="tab:blue", label="scratch test")
    ax.plot(taus, [r["enn_train_mse"] for r in agg],
            marker="o", color="tab:blue", linestyle="--", label="scratch train")
    if report.config.paired:
        ax.plot(taus, [r["enn_tf_test_mse"] for r in agg],
                marker="s", color="tab:orange", label="transfer test")
        ax.plot(taus, [r["enn_tf_train_mse"] for r in agg],
                marker="s", color="tab:orange", linestyle="--", label="transfer train")
    ax.set_xlabel("expectile level tau")
    ax.set_ylabel("mean squared error")
    ax.set_title(f"{report.config.phenotype}: mean MSE over "
                 f"{report.config.replicates} replicates")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_curves_figure(rows, path) -> str:
    """Sorted predictions per tau from expectile_curve_rows output."""
    by_tau = {}
    for row in rows:
        by_tau.setdefault(row["tau"], []).append((row["rank"], row["value"]))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for tau in sorted(by_tau):
        pts = sorted(by_tau[tau])
        ax.plot([r for r, _ in pts], [v for _, v in pts], label=f"tau={tau:g}")
    ax.set_xlabel("rank")
    ax.set_ylabel("prediction")
    ax.set_title("expectile curves")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
