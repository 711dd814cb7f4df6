from __future__ import annotations

import numpy as np
import pytest

from kgcm.config import load_config
from kgcm.demo import make_demo_frame
from kgcm.experiment import prepare_from_frame
from kgcm.ingest import DEFAULT_SCHEMA, TimeSeriesFrame


def make_frame(values: np.ndarray, start: str = "2020-01-01") -> TimeSeriesFrame:
    """Frame with explicit feature values (T x 5) and consecutive dates."""
    values = np.asarray(values, dtype=np.float64)
    dates = np.datetime64(start, "D") + np.arange(values.shape[0])
    return TimeSeriesFrame(dates, values, DEFAULT_SCHEMA)


def write_demo_csv(path, days=400, seed=0) -> str:
    frame = make_demo_frame(days, seed=seed)
    frame.to_csv(path)
    return str(path)


@pytest.fixture(scope="session")
def small_prepared():
    """Shared small prepared dataset (T=400, defaults) for model/eval tests."""
    cfg = load_config()
    frame = make_demo_frame(400, seed=0)
    return prepare_from_frame(frame, cfg), cfg
