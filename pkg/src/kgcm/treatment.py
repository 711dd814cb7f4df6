"""Physically guided treatment-signal generation.

The counterfactual treatment is a velocity-modulated sea-surface-height
signal: SSH is smoothed with a centered moving window, the smoothed total
velocity drives a sigmoid modulation factor

    sigma_t = 1 / (1 + exp(-a * (v_t - v0)))

and the treated signal amplifies the smoothed SSH by (1 + beta_mod * sigma_t).
v0 may be the literal token "median", resolved on the training split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

# Keeps the sigmoid inside the open unit interval in float64 (exp never
# overflows and 1 - sigma stays representable).
_SIGMOID_CLIP = 36.0


@dataclass(frozen=True)
class TreatmentConfig:
    smooth_window: int = 7
    a: float = 10.0
    v0: float | str = "median"     # number, or "median" resolved on the training split
    beta_mod: float = 0.1
    velocity_scale: float = 1.0    # scenario knob: scales smoothed velocity before the sigmoid

    def __post_init__(self):
        if self.smooth_window < 1:
            raise DataError("treatment.smooth_window must be >= 1")
        if self.a <= 0:
            raise DataError("treatment.a must be > 0")
        if self.beta_mod < 0:
            raise DataError("treatment.beta_mod must be >= 0")
        if isinstance(self.v0, str) and self.v0 != "median":
            raise DataError(f"treatment.v0 must be a number or 'median', got {self.v0!r}")


@dataclass(frozen=True)
class ModulatedSeries:
    """Smoothed, modulated treatment signal plus the latent-balance grouping."""

    ssh_smooth: np.ndarray    # smoothed SSH (factual, unmodulated trajectory)
    v_smooth: np.ndarray      # smoothed total velocity
    sigma: np.ndarray         # sigmoid modulation factor, strictly in (0, 1)
    ssh_treat: np.ndarray     # modulated SSH (counterfactual trajectory)
    group_label: np.ndarray   # 1 where sigma >= 0.5 (velocity above transition center)
    v0: float                 # resolved transition center


def smooth(series: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average of width ``window``.

    The window spans [t - (W-1)//2, t + W//2] and is truncated to the
    available samples near the boundaries (no padding); output length equals
    input length.
    """
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if window < 1:
        raise DataError("smoothing window must be >= 1")
    if window > n:
        raise DataError(f"smoothing window {window} exceeds series length {n}")
    if window == 1:
        return series.copy()
    csum = np.concatenate(([0.0], np.cumsum(series)))
    t = np.arange(n)
    lo = np.maximum(0, t - (window - 1) // 2)
    hi = np.minimum(n, t + window // 2 + 1)
    return (csum[hi] - csum[lo]) / (hi - lo)


def modulation_factor(v_smooth: np.ndarray, a: float, v0: float) -> np.ndarray:
    """Sigmoid modulation factor sigma_t, computed without overflow.

    The argument is clamped to +/-36 so sigma stays strictly inside (0, 1)
    even for |a * (v - v0)| up to 1e3 and beyond.
    """
    if a <= 0:
        raise DataError("sigmoid steepness a must be > 0")
    v_smooth = np.asarray(v_smooth, dtype=np.float64)
    if not np.all(np.isfinite(v_smooth)):
        raise DataError("non-finite velocity input to modulation_factor")
    x = np.clip(a * (v_smooth - v0), -_SIGMOID_CLIP, _SIGMOID_CLIP)
    return 1.0 / (1.0 + np.exp(-x))


def modulate(ssh_smooth: np.ndarray, sigma: np.ndarray, beta_mod: float) -> np.ndarray:
    """Amplify the smoothed SSH by (1 + beta_mod * sigma) elementwise."""
    ssh_smooth = np.asarray(ssh_smooth, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if ssh_smooth.shape != sigma.shape:
        raise DataError(
            f"length mismatch: ssh {ssh_smooth.shape} vs sigma {sigma.shape}"
        )
    if beta_mod < 0:
        raise DataError("beta_mod must be >= 0")
    return (1.0 + beta_mod * sigma) * ssh_smooth


def lag_shift(series: np.ndarray, lag: int) -> np.ndarray:
    """Shift a series back by ``lag`` steps: output[t] = input[t - lag].

    The first ``lag`` positions are marked invalid with NaN and must be
    excluded from window construction (they are never zero-filled).
    """
    series = np.asarray(series, dtype=np.float64)
    if lag < 1:
        raise DataError("lag must be >= 1")
    if lag >= len(series):
        raise DataError(f"lag {lag} must be smaller than series length {len(series)}")
    out = np.full_like(series, np.nan)
    out[lag:] = series[:-lag]
    return out


def build_treatment(ssh: np.ndarray, vtot: np.ndarray, cfg: TreatmentConfig,
                    v0_resolved: float | None = None) -> ModulatedSeries:
    """Assemble the full treatment signal from SSH and total-velocity series.

    ``v0_resolved`` overrides the config's transition center; pass the value
    resolved on the training split when processing validation/test segments.
    The group label is 1 where sigma >= 0.5, i.e. where the smoothed velocity
    exceeds the transition center.
    """
    if len(ssh) != len(vtot):
        raise DataError("ssh and vtot must have equal length")
    ssh_smooth = smooth(ssh, cfg.smooth_window)
    v_smooth = smooth(vtot, cfg.smooth_window) * cfg.velocity_scale
    if v0_resolved is not None:
        v0 = float(v0_resolved)
    elif cfg.v0 == "median":
        v0 = float(np.median(v_smooth))
    else:
        v0 = float(cfg.v0)
    sigma = modulation_factor(v_smooth, cfg.a, v0)
    ssh_treat = modulate(ssh_smooth, sigma, cfg.beta_mod)
    group = (sigma >= 0.5).astype(np.int64)
    return ModulatedSeries(ssh_smooth, v_smooth, sigma, ssh_treat, group, v0)
