"""Static plot emission from run-directory artifacts.

One treatment-vs-outcome panel pair per scenario (e.g. an SSH-perturbed and a
velocity-perturbed run), plus training-loss curves and the latent-balance
trajectory when a training log is present.  File names are deterministic and
re-running with identical inputs overwrites byte-identical images.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

from .errors import DataError

_DPI = 110
_METADATA = {"Software": "kgcm"}   # pinned so PNG bytes do not vary across runs


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=_DPI, metadata=_METADATA)
    plt.close(fig)
    return path


def _treatment_outcome_panels(scenario: str, run_dir: Path, out_dir: Path) -> Path:
    tpath = run_dir / "treatment" / "test.csv"
    ppath = run_dir / "eval" / "predictions.csv"
    if not tpath.exists():
        raise DataError(f"missing treatment series for scenario '{scenario}': {tpath}")
    if not ppath.exists():
        raise DataError(f"missing predictions for scenario '{scenario}': {ppath}")
    treat = pd.read_csv(tpath)
    pred = pd.read_csv(ppath)

    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=False)
    ax = axes[0]
    ax.plot(range(len(treat)), treat["ssh_smooth"], label="factual (smoothed)", lw=1.0)
    ax.plot(range(len(treat)), treat["ssh_treat"], label="perturbed (modulated)", lw=1.0)
    ax.set_title(f"{scenario}: treatment signal (test split)")
    ax.set_ylabel("standardized SSH")
    ax.legend(loc="best", fontsize=8)

    ax = axes[1]
    ax.plot(pred["anchor_t"], pred["y1_hat"], label="predicted factual", lw=1.0)
    ax.plot(pred["anchor_t"], pred["y2_hat"], label="predicted counterfactual", lw=1.0)
    ax.plot(pred["anchor_t"], pred["y1"], label="observed factual", lw=0.8, alpha=0.6)
    ax.set_title("outcome under both trajectories")
    ax.set_xlabel("day index")
    ax.set_ylabel("standardized thickness")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, out_dir / f"treatment_outcome_{scenario}.png")


def _loss_figures(scenario: str, run_dir: Path, out_dir: Path) -> list[Path]:
    log_path = run_dir / "model" / "train_log.jsonl"
    if not log_path.exists():
        return []
    rows = [json.loads(line) for line in log_path.read_text().splitlines() if line]
    if not rows:
        return []
    epochs = [r["epoch"] for r in rows]
    made = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in ("l_pred", "l_kl", "l_mmd", "total", "val_mse"):
        ax.plot(epochs, [r[key] for r in rows], label=key, lw=1.0)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(f"{scenario}: training losses")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    made.append(_save(fig, out_dir / f"loss_curves_{scenario}.png"))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(epochs, [r["l_mmd"] for r in rows], lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("latent MMD^2")
    ax.set_title(f"{scenario}: latent balance over training")
    fig.tight_layout()
    made.append(_save(fig, out_dir / f"latent_mmd_{scenario}.png"))
    return made


def emit_plots(runs: list[tuple[str, Path]], out_dir: Path) -> list[Path]:
    """Emit figures for each (scenario, run_dir) pair into ``out_dir``.

    An empty scenario list produces no files and succeeds with a notice.
    """
    out_dir = Path(out_dir)
    if not runs:
        print("kgcm plot: no scenarios configured, nothing to do")
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    made: list[Path] = []
    for scenario, run_dir in runs:
        run_dir = Path(run_dir)
        made.append(_treatment_outcome_panels(scenario, run_dir, out_dir))
        made.extend(_loss_figures(scenario, run_dir, out_dir))
    return made
