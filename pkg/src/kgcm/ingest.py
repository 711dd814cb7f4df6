"""Loading, spatial reduction, standardization, and chronological splitting.

Desk-scale inputs are flat CSV files of daily, spatially averaged series with
header ``date,sit,ssh,u,v,vtot``.  An optional gridded path (one flat file per
variable, header ``date,lat,lon,value``) feeds :func:`spatial_average`.

Standardization uses the population (divide-by-N) standard deviation
convention; stats are computed on the training split only and applied
unchanged to the other splits.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

DEFAULT_SCHEMA = ("sit", "ssh", "u", "v", "vtot")

ONE_DAY = np.timedelta64(1, "D")


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Dated multivariate daily series.

    dates are strictly increasing with a step of exactly one day, and the
    feature matrix has one row per date with no missing values.
    """

    dates: np.ndarray          # datetime64[D], shape (T,)
    features: np.ndarray       # float64, shape (T, p)
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataError("features must be a T x p matrix")
        if len(self.dates) != self.features.shape[0]:
            raise DataError(
                f"row count {self.features.shape[0]} does not match "
                f"date count {len(self.dates)}"
            )
        if self.features.shape[1] != len(self.feature_names):
            raise DataError("feature_names length does not match feature columns")
        if len(self.dates) > 1:
            steps = np.diff(self.dates)
            bad = np.nonzero(steps != ONE_DAY)[0]
            if bad.size:
                k = int(bad[0]) + 1
                if steps[bad[0]] == np.timedelta64(0, "D"):
                    raise DataError(f"duplicate date at row {k}")
                if steps[bad[0]] < np.timedelta64(0, "D"):
                    raise DataError(f"dates not strictly increasing at row {k}")
                raise DataError(f"date gap at row {k}")
        if not np.all(np.isfinite(self.features)):
            t, j = np.argwhere(~np.isfinite(self.features))[0]
            raise DataError(
                f"missing or non-finite value at row {int(t)},"
                f" column '{self.feature_names[int(j)]}'"
            )

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature '{name}'") from None
        return self.features[:, j]

    def slice(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.dates[start:stop],
                               self.features[start:stop].copy(),
                               self.feature_names)

    def to_csv(self, path: str | Path) -> None:
        df = pd.DataFrame(self.features, columns=list(self.feature_names))
        df.insert(0, "date", self.dates.astype("datetime64[D]").astype(str))
        df.to_csv(path, index=False, float_format="%.17g")


@dataclass(frozen=True)
class StandardizationStats:
    """Per-feature mean and population standard deviation of the training split."""

    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if np.any(self.std <= 0):
            j = int(np.argmax(self.std <= 0))
            raise DataError(f"zero-variance feature '{self.feature_names[j]}'")


def _check_vtot(features: np.ndarray, names: tuple[str, ...]) -> None:
    if "vtot" in names:
        vtot = features[:, names.index("vtot")]
        if np.any(vtot < 0):
            k = int(np.argmax(vtot < 0))
            raise DataError(f"negative vtot at row {k}")


def load_series(path: str | Path, schema: tuple[str, ...] = DEFAULT_SCHEMA) -> TimeSeriesFrame:
    """Load a daily multivariate CSV (header ``date,<schema...>``).

    Raises DataError with a row/column location for a missing column,
    unparseable date, date gap or duplicate, or non-numeric cell.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    df = pd.read_csv(path, dtype=str)
    if "date" not in df.columns:
        raise DataError(f"missing column 'date' in {path}")
    for col in schema:
        if col not in df.columns:
            raise DataError(f"missing column '{col}' in {path}")
    try:
        dates = pd.to_datetime(df["date"], format="ISO8601").to_numpy().astype("datetime64[D]")
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable date in {path}: {exc}") from None

    values = np.empty((len(df), len(schema)), dtype=np.float64)
    for j, col in enumerate(schema):
        bad = pd.to_numeric(df[col], errors="coerce").isna()
        if bad.any():
            k = int(bad.idxmax())
            raise DataError(f"non-numeric cell at row {k}, column '{col}'")
        # element-wise float() conversion is correctly rounded, so writing a
        # frame at %.17g and reloading it round-trips bit-exactly
        values[:, j] = df[col].to_numpy().astype(np.float64)

    _check_vtot(values, tuple(schema))
    return TimeSeriesFrame(dates, values, tuple(schema))


def load_gridded(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Load one variable from a flat gridded file (header ``date,lat,lon,value``).

    Returns (dates, lats, lons, cube) where cube has shape
    (T, n_lat, n_lon) and NaN marks cells absent from the file.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    df = pd.read_csv(path)
    for col in ("date", "lat", "lon", "value"):
        if col not in df.columns:
            raise DataError(f"missing column '{col}' in {path}")
    try:
        day = pd.to_datetime(df["date"], format="ISO8601").to_numpy().astype("datetime64[D]")
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable date in {path}: {exc}") from None

    dates = np.unique(day)
    lats = np.unique(df["lat"].to_numpy(dtype=np.float64))
    lons = np.unique(df["lon"].to_numpy(dtype=np.float64))
    cube = np.full((len(dates), len(lats), len(lons)), np.nan)
    ti = np.searchsorted(dates, day)
    yi = np.searchsorted(lats, df["lat"].to_numpy(dtype=np.float64))
    xi = np.searchsorted(lons, df["lon"].to_numpy(dtype=np.float64))
    cube[ti, yi, xi] = df["value"].to_numpy(dtype=np.float64)
    return dates, lats, lons, cube


def spatial_average(dates: np.ndarray, lats: np.ndarray,
                    grids: dict[str, np.ndarray],
                    lat_min: float, lat_max: float,
                    area_weighted: bool = False) -> TimeSeriesFrame:
    """Reduce per-variable (time, lat, lon) cubes to daily means over a latitude band.

    Cells flagged missing (NaN) are excluded from the mean; a day whose entire
    subset is missing is an error.  With ``area_weighted`` the mean is weighted
    by cos(latitude); the unweighted mean is the default.
    """
    keep = (lats >= lat_min) & (lats <= lat_max)
    if not keep.any():
        raise DataError(f"empty latitude subset for [{lat_min}, {lat_max}]")
    names = tuple(grids.keys())
    out = np.empty((len(dates), len(names)))
    for j, name in enumerate(names):
        sub = grids[name][:, keep, :]          # (T, n_keep, n_lon)
        valid = np.isfinite(sub)
        if not valid.any(axis=(1, 2)).all():
            t = int(np.argmin(valid.any(axis=(1, 2))))
            raise DataError(f"all cells missing for '{name}' at row {t}")
        if area_weighted:
            w = np.cos(np.deg2rad(lats[keep]))[None, :, None]
            w = np.broadcast_to(w, sub.shape)
            wsum = np.where(valid, w, 0.0).sum(axis=(1, 2))
            out[:, j] = np.where(valid, sub * w, 0.0).sum(axis=(1, 2)) / wsum
        else:
            out[:, j] = np.nanmean(sub, axis=(1, 2))
    _check_vtot(out, names)
    return TimeSeriesFrame(np.asarray(dates, dtype="datetime64[D]"), out, names)


def standardize(frame: TimeSeriesFrame,
                stats: StandardizationStats | None = None
                ) -> tuple[TimeSeriesFrame, StandardizationStats]:
    """Standardize each feature to zero mean and unit population SD.

    When ``stats`` is given (from the training split) it is applied unchanged;
    otherwise stats are computed from ``frame`` itself.
    """
    if stats is None:
        mean = frame.features.mean(axis=0)
        std = frame.features.std(axis=0)   # population (divide-by-N) convention
        stats = StandardizationStats(mean, std, frame.feature_names)
    elif stats.feature_names != frame.feature_names:
        raise DataError("standardization stats do not match frame features")
    z = (frame.features - stats.mean) / stats.std
    return TimeSeriesFrame(frame.dates, z, frame.feature_names), stats


def unstandardize(frame: TimeSeriesFrame, stats: StandardizationStats) -> TimeSeriesFrame:
    """Invert :func:`standardize`; composing the two is the identity to round-off."""
    x = frame.features * stats.std + stats.mean
    return TimeSeriesFrame(frame.dates, x, frame.feature_names)


def chronological_split(frame: TimeSeriesFrame,
                        fractions: tuple[float, float, float] = (0.7, 0.15, 0.15),
                        min_length: int = 1
                        ) -> tuple[TimeSeriesFrame, TimeSeriesFrame, TimeSeriesFrame]:
    """Split into contiguous train/val/test segments, in time order.

    Lengths are floor(T * fraction) for train and val with the remainder
    assigned to test.  ``min_length`` guards against segments too short to
    yield a single window (lookback + lead + lag).
    """
    if any(f <= 0 for f in fractions):
        raise DataError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must sum to 1, got {sum(fractions)}")
    T = len(frame)
    n_train = int(T * fractions[0])
    n_val = int(T * fractions[1])
    n_test = T - n_train - n_val
    for name, n in (("train", n_train), ("val", n_val), ("test", n_test)):
        if n < min_length:
            raise DataError(
                f"{name} segment of length {n} is shorter than the "
                f"required minimum {min_length}"
            )
    return (frame.slice(0, n_train),
            frame.slice(n_train, n_train + n_val),
            frame.slice(n_train + n_val, T))
