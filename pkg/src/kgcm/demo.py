"""Deterministic demo data: a plausible Arctic-like daily multivariate series.

Produces the five canonical columns (sit, ssh, u, v, vtot) with seasonal
cycles, persistent AR(1) anomalies, and a lagged SSH influence on ice
thickness, so the pipeline has real structure to learn at desk scale.  Not a
physical simulation; magnitudes are loosely realistic and everything is
standardized downstream anyway.
"""

from __future__ import annotations

import numpy as np

from .ingest import DEFAULT_SCHEMA, TimeSeriesFrame

_YEAR = 365.25


def _ar1(rng: np.random.Generator, n: int, phi: float, sd: float) -> np.ndarray:
    eps = rng.normal(0.0, sd, size=n)
    out = np.empty(n)
    out[0] = eps[0] / np.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        out[t] = phi * out[t - 1] + eps[t]
    return out


def make_demo_frame(days: int = 2000, seed: int = 0,
                    start: str = "2020-01-01") -> TimeSeriesFrame:
    if days < 2:
        raise ValueError("days must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    t = np.arange(days)
    phase = 2.0 * np.pi * t / _YEAR

    u = 0.04 * np.cos(phase + 0.5) + 0.02 + _ar1(rng, days, 0.97, 0.004)
    v = 0.03 * np.sin(phase + 1.2) + 0.01 + _ar1(rng, days, 0.97, 0.004)
    vtot = np.hypot(u, v)

    # SSH: seasonal cycle plus a persistent anomaly, mildly coupled to the flow
    ssh = (0.12 * np.sin(phase - 0.8)
           + 0.5 * (vtot - vtot.mean())
           + _ar1(rng, days, 0.985, 0.006))

    # Ice thickness: strong seasonal cycle, a delayed SSH influence, slow noise
    ssh_delayed = np.concatenate([np.full(5, ssh[0]), ssh[:-5]])
    sit = (1.6 + 0.9 * np.cos(phase - 0.3)
           - 0.8 * ssh_delayed
           + _ar1(rng, days, 0.95, 0.01))
    sit = np.maximum(sit, 0.05)

    dates = np.datetime64(start, "D") + t
    features = np.column_stack([sit, ssh, u, v, vtot])
    return TimeSeriesFrame(dates, features, DEFAULT_SCHEMA)
