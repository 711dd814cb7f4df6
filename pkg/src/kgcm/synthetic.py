"""Synthetic counterfactual outcomes with a known bounded nonlinear effect.

Given a factual outcome series y0 and the two treatment trajectories, the
counterfactual outcome is

    y1 = y0 + beta_eff * tanh(alpha * (t1 - t0 - mu_t)) + eps

where mu_t centers the treatment difference and eps is i.i.d. Gaussian noise.
The noiseless effect series is the ground-truth target for effect-recovery
metrics.  mu_t is frozen on the generation (training) set and reused verbatim
for validation/test counterfactuals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError


@dataclass(frozen=True)
class SynthConfig:
    alpha: float = 2.0       # tanh steepness
    beta_eff: float = 0.5    # effect magnitude (tanh bound)
    noise_sd: float = 0.05
    seed: int = 0            # 64-bit seed for the PCG64 noise generator

    def __post_init__(self):
        if self.alpha <= 0:
            raise DataError("synth.alpha must be > 0")
        if self.noise_sd < 0:
            raise DataError("synth.noise_sd must be >= 0")


@dataclass(frozen=True)
class SynthOutput:
    y1: np.ndarray         # counterfactual outcome (noiseless effect + noise)
    tau_true: np.ndarray   # noiseless effect: beta_eff * tanh(alpha * (dT - mu_t))
    mu_t: float            # mean treatment difference on the generation set


def gen_counterfactual(y0: np.ndarray, t1: np.ndarray, t0: np.ndarray,
                       cfg: SynthConfig, mu_t: float | None = None) -> SynthOutput:
    """Generate counterfactual outcomes under the treated trajectory ``t1``.

    ``t1`` is the treated (modulated) and ``t0`` the factual (unmodulated)
    treatment series.  When ``mu_t`` is None the centering constant is the
    mean of (t1 - t0) over this set; pass the training-set value to keep the
    centering frozen across splits.  Noise is drawn deterministically from
    numpy's PCG64 generator under ``cfg.seed``; ``tau_true`` excludes it.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    t1 = np.asarray(t1, dtype=np.float64)
    t0 = np.asarray(t0, dtype=np.float64)
    if not (len(y0) == len(t1) == len(t0)):
        raise DataError(
            f"length mismatch: y0 {len(y0)}, t1 {len(t1)}, t0 {len(t0)}"
        )
    diff = t1 - t0
    if mu_t is None:
        mu_t = float(diff.mean())
    tau_true = cfg.beta_eff * np.tanh(cfg.alpha * (diff - mu_t))
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    eps = rng.normal(0.0, cfg.noise_sd, size=len(y0)) if cfg.noise_sd > 0 else np.zeros(len(y0))
    return SynthOutput(y0 + tau_true + eps, tau_true, mu_t)


def ground_truth_ite(out: SynthOutput) -> np.ndarray:
    """Noiseless effect series (treated-minus-factual convention of the generator)."""
    return out.tau_true


def write_counterfactual_csv(path: str | Path, dates: np.ndarray,
                             y0: np.ndarray, out: SynthOutput,
                             t0: np.ndarray, t1: np.ndarray,
                             cfg: SynthConfig) -> None:
    """Emit ``date,y0,y1,t0,t1,tau_true`` plus a sidecar metadata JSON."""
    path = Path(path)
    df = pd.DataFrame({
        "date": np.asarray(dates, dtype="datetime64[D]").astype(str),
        "y0": y0, "y1": out.y1, "t0": t0, "t1": t1, "tau_true": out.tau_true,
    })
    df.to_csv(path, index=False, float_format="%.17g")
    meta = {"config": asdict(cfg), "mu_t": out.mu_t}
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_counterfactual_csv(path: str | Path) -> tuple[pd.DataFrame, dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"counterfactual file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    return df, meta
