"""Sliding-window construction of dual-trajectory supervised samples.

Each sample anchored at time t packs the covariate history over the lookback
window [t-L+1, t], the factual (unmodulated) and counterfactual (modulated)
treatment histories together with their lag-shifted versions, the features at
the anchor step (decoder gating input), and the outcomes at t+n under both
trajectories.  Anchors whose lagged history would leave the series are
dropped, never padded, so the sample count is T - n - (L + lag - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .ingest import TimeSeriesFrame
from .synthetic import SynthOutput
from .treatment import ModulatedSeries, lag_shift


@dataclass(frozen=True)
class WindowConfig:
    lookback: int = 14
    lead: int = 1
    lag: int = 1
    outcome_feature: str = "sit"
    treatment_feature: str = "ssh"

    def __post_init__(self):
        if self.lookback < 1 or self.lead < 1 or self.lag < 1:
            raise DataError("window lookback, lead, and lag must all be >= 1")

    @property
    def min_series_length(self) -> int:
        # shortest series yielding one valid anchor
        return self.lookback + self.lag + self.lead


@dataclass(frozen=True)
class WindowedSample:
    """One training instance; trajectory 1 is factual, 2 is counterfactual."""

    x_hist: np.ndarray      # (L, p) covariate history
    t1_hist: np.ndarray     # (L,) factual treatment history
    t1_lag: np.ndarray      # (L,) factual treatment history shifted by lag
    t2_hist: np.ndarray     # (L,) counterfactual treatment history
    t2_lag: np.ndarray      # (L,) counterfactual treatment, shifted by lag
    x_prev: np.ndarray      # (p,) features at the anchor step (decoder input)
    y1: float               # outcome at t+n under the factual trajectory
    y2: float | None        # outcome at t+n under the counterfactual trajectory
    tau: float | None       # noiseless ground-truth effect, factual minus counterfactual
    group_label: int        # latent-balance group at the anchor step
    anchor_t: int           # 0-based anchor index into the source series


@dataclass(frozen=True)
class Batch:
    """Column-stacked view of a list of samples."""

    x_hist: np.ndarray      # (B, L, p)
    t1_hist: np.ndarray     # (B, L)
    t1_lag: np.ndarray
    t2_hist: np.ndarray
    t2_lag: np.ndarray
    x_prev: np.ndarray      # (B, p)
    y1: np.ndarray          # (B,)
    y2: np.ndarray | None
    tau: np.ndarray | None
    group_label: np.ndarray
    anchor_t: np.ndarray

    def __len__(self) -> int:
        return self.x_hist.shape[0]


def window_count(T: int, cfg: WindowConfig) -> int:
    """Closed-form number of valid anchors: T - n - (L + lag - 1)."""
    return T - cfg.lead - (cfg.lookback + cfg.lag - 1)


def build_windows(frame: TimeSeriesFrame, treat: ModulatedSeries,
                  y_cf: SynthOutput | None, cfg: WindowConfig) -> list[WindowedSample]:
    """Build one sample per valid anchor, in increasing anchor order.

    When ``y_cf`` is absent (real-data mode) y2 and tau are None and
    downstream effect metrics are disabled.  tau follows the
    factual-minus-counterfactual sign convention, i.e. it is the negated
    generator effect, so that a perfect model's predicted contrast
    yhat1 - yhat2 matches tau exactly.
    """
    T = len(frame)
    L, n, lag = cfg.lookback, cfg.lead, cfg.lag
    if len(treat.ssh_smooth) != T:
        raise DataError("treatment series length does not match frame")
    if y_cf is not None and len(y_cf.y1) != T:
        raise DataError("counterfactual series length does not match frame")
    count = window_count(T, cfg)
    if count <= 0:
        raise DataError(
            f"zero valid anchors for T={T}, lookback={L}, lead={n}, lag={lag}"
        )

    y = frame.column(cfg.outcome_feature)
    t1 = treat.ssh_smooth
    t2 = treat.ssh_treat
    t1_lagged = lag_shift(t1, lag)
    t2_lagged = lag_shift(t2, lag)

    samples = []
    for idx in range(L + lag - 1, T - n):
        sl = slice(idx - L + 1, idx + 1)
        sample = WindowedSample(
            x_hist=frame.features[sl].copy(),
            t1_hist=t1[sl].copy(),
            t1_lag=t1_lagged[sl].copy(),
            t2_hist=t2[sl].copy(),
            t2_lag=t2_lagged[sl].copy(),
            x_prev=frame.features[idx].copy(),
            y1=float(y[idx + n]),
            y2=float(y_cf.y1[idx + n]) if y_cf is not None else None,
            tau=-float(y_cf.tau_true[idx + n]) if y_cf is not None else None,
            group_label=int(treat.group_label[idx]),
            anchor_t=idx,
        )
        if np.isnan(sample.t1_lag).any() or np.isnan(sample.t2_lag).any():
            raise DataError(f"invalid lagged history reached window at anchor {idx}")
        samples.append(sample)
    assert len(samples) == count
    return samples


def stack_samples(samples: list[WindowedSample]) -> Batch:
    if not samples:
        raise DataError("cannot stack an empty sample list")
    has_cf = samples[0].y2 is not None
    return Batch(
        x_hist=np.stack([s.x_hist for s in samples]),
        t1_hist=np.stack([s.t1_hist for s in samples]),
        t1_lag=np.stack([s.t1_lag for s in samples]),
        t2_hist=np.stack([s.t2_hist for s in samples]),
        t2_lag=np.stack([s.t2_lag for s in samples]),
        x_prev=np.stack([s.x_prev for s in samples]),
        y1=np.array([s.y1 for s in samples]),
        y2=np.array([s.y2 for s in samples]) if has_cf else None,
        tau=np.array([s.tau for s in samples]) if has_cf else None,
        group_label=np.array([s.group_label for s in samples]),
        anchor_t=np.array([s.anchor_t for s in samples]),
    )


def batch(samples: list[WindowedSample], batch_size: int,
          shuffle_seed: int | None = None) -> list[Batch]:
    """Partition samples into batches, keeping the final partial batch.

    With ``shuffle_seed`` set, the order is a deterministic permutation from
    numpy's PCG64 generator; with None the source order is preserved.  Every
    sample appears exactly once.
    """
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    if not samples:
        raise DataError("empty sample set")
    order = np.arange(len(samples))
    if shuffle_seed is not None:
        order = np.random.Generator(np.random.PCG64(shuffle_seed)).permutation(order)
    return [
        stack_samples([samples[i] for i in order[start:start + batch_size]])
        for start in range(0, len(samples), batch_size)
    ]
