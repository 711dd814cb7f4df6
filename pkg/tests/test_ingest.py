from __future__ import annotations

import numpy as np
import pytest

from kgcm.errors import DataError
from kgcm.ingest import (DEFAULT_SCHEMA, chronological_split, load_series,
                         spatial_average, standardize, unstandardize)

from conftest import make_frame, write_demo_csv


def _write_csv(path, rows, header="date,sit,ssh,u,v,vtot"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_load_series_five_rows(tmp_path):
    rows = [f"2020-01-0{d},1.{d},0.0{d},0.01,0.02,0.03" for d in range(1, 6)]
    frame = load_series(_write_csv(tmp_path / "a.csv", rows))
    assert len(frame) == 5
    assert frame.n_features == 5
    assert frame.feature_names == DEFAULT_SCHEMA


def test_load_series_date_gap(tmp_path):
    rows = ["2020-01-01,1,0,0,0,0.1",
            "2020-01-02,1,0,0,0,0.1",
            "2020-01-04,1,0,0,0,0.1"]
    with pytest.raises(DataError, match="date gap at row 2"):
        load_series(_write_csv(tmp_path / "gap.csv", rows))


def test_load_series_duplicate_date(tmp_path):
    rows = ["2020-01-01,1,0,0,0,0.1", "2020-01-01,1,0,0,0,0.1"]
    with pytest.raises(DataError, match="duplicate date at row 1"):
        load_series(_write_csv(tmp_path / "dup.csv", rows))


def test_load_series_missing_column(tmp_path):
    path = _write_csv(tmp_path / "m.csv", ["2020-01-01,1,0,0,0"],
                      header="date,sit,ssh,u,v")
    with pytest.raises(DataError, match="missing column 'vtot'"):
        load_series(path)


def test_load_series_non_numeric_cell(tmp_path):
    rows = ["2020-01-01,1,0,0,0,0.1", "2020-01-02,1,oops,0,0,0.1"]
    with pytest.raises(DataError, match="row 1, column 'ssh'"):
        load_series(_write_csv(tmp_path / "n.csv", rows))


def test_load_series_negative_vtot(tmp_path):
    rows = ["2020-01-01,1,0,0,0,-0.1"]
    with pytest.raises(DataError, match="negative vtot"):
        load_series(_write_csv(tmp_path / "v.csv", rows))


def test_load_series_1620_days(tmp_path):
    path = write_demo_csv(tmp_path / "long.csv", days=1620, seed=1)
    frame = load_series(path)
    assert len(frame) == 1620
    assert str(frame.dates[0]) == "2020-01-01"


def test_spatial_average_constant_field():
    dates = np.datetime64("2020-01-01") + np.arange(3)
    lats = np.array([60.0, 61.0])
    cube = np.full((3, 2, 4), 2.5)
    frame = spatial_average(dates, lats, {"ssh": cube}, 60, 90)
    assert np.allclose(frame.features[:, 0], 2.5)


def test_spatial_average_two_by_two():
    dates = np.datetime64("2020-01-01") + np.arange(1)
    lats = np.array([70.0, 71.0])
    cube = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    frame = spatial_average(dates, lats, {"ssh": cube}, 60, 90)
    assert frame.features[0, 0] == pytest.approx(2.5, abs=1e-12)


def test_spatial_average_latitude_subset_count():
    # 1-degree global grid: 181 latitudes, 31 of them inside [60, 90]
    lats = np.linspace(-90, 90, 181)
    keep = (lats >= 60) & (lats <= 90)
    assert keep.sum() == 31
    dates = np.datetime64("2020-01-01") + np.arange(2)
    cube = np.zeros((2, 181, 3))
    cube[:, keep, :] = 1.0   # retained cells average to exactly 1
    frame = spatial_average(dates, lats, {"ssh": cube}, 60, 90)
    assert np.allclose(frame.features, 1.0)


def test_spatial_average_excludes_missing_cells():
    dates = np.datetime64("2020-01-01") + np.arange(1)
    lats = np.array([70.0])
    cube = np.array([[[1.0, np.nan, 3.0]]])
    frame = spatial_average(dates, lats, {"ssh": cube}, 60, 90)
    assert frame.features[0, 0] == pytest.approx(2.0)


def test_spatial_average_all_missing_day_errors():
    dates = np.datetime64("2020-01-01") + np.arange(1)
    lats = np.array([70.0])
    cube = np.array([[[np.nan, np.nan]]])
    with pytest.raises(DataError, match="all cells missing"):
        spatial_average(dates, lats, {"ssh": cube}, 60, 90)


def test_spatial_average_empty_subset_errors():
    dates = np.datetime64("2020-01-01") + np.arange(1)
    lats = np.array([10.0, 20.0])
    with pytest.raises(DataError, match="empty latitude subset"):
        spatial_average(dates, lats, {"ssh": np.zeros((1, 2, 2))}, 60, 90)


def test_spatial_average_permutation_invariant():
    rng = np.random.default_rng(3)
    dates = np.datetime64("2020-01-01") + np.arange(4)
    lats = np.array([60.0, 65.0, 70.0])
    cube = rng.normal(size=(4, 3, 5))
    base = spatial_average(dates, lats, {"ssh": cube}, 60, 90)
    shuffled = cube[:, :, rng.permutation(5)]
    perm = spatial_average(dates, lats, {"ssh": shuffled}, 60, 90)
    assert np.allclose(base.features, perm.features, atol=1e-12)


def test_standardize_hand_example():
    values = np.zeros((3, 5))
    values[:, 0] = [1.0, 2.0, 3.0]
    values[:, 1:] = np.array([[1, 2, 3]]).T * [0.1, 0.2, 0.3, 0.4]
    frame = make_frame(values)
    std_frame, stats = standardize(frame)
    expected = [-1.224744871391589, 0.0, 1.224744871391589]
    assert np.allclose(std_frame.features[:, 0], expected, atol=1e-12)
    assert stats.std[0] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-15)


def test_standardize_is_idempotent_on_standardized_data():
    rng = np.random.default_rng(0)
    frame = make_frame(rng.normal(size=(50, 5)) + 1.0)
    once, _ = standardize(frame)
    twice, _ = standardize(once)
    assert np.allclose(once.features, twice.features, atol=1e-9)


def test_standardize_zero_variance_errors():
    values = np.ones((10, 5))
    values[:, 1:] = np.random.default_rng(1).normal(size=(10, 4))
    with pytest.raises(DataError, match="zero-variance feature 'sit'"):
        standardize(make_frame(values))


def test_standardize_round_trip(tmp_path):
    path = write_demo_csv(tmp_path / "d.csv", days=120, seed=2)
    frame = load_series(path)
    std_frame, stats = standardize(frame)
    back = unstandardize(std_frame, stats)
    assert np.allclose(back.features, frame.features, atol=1e-9)
    assert std_frame.features.mean(axis=0) == pytest.approx(np.zeros(5), abs=1e-9)
    assert std_frame.features.std(axis=0) == pytest.approx(np.ones(5), abs=1e-9)


def test_standardize_applies_given_stats_unchanged():
    rng = np.random.default_rng(4)
    train = make_frame(rng.normal(size=(40, 5)))
    other = make_frame(rng.normal(size=(20, 5)) + 3.0)
    _, stats = standardize(train)
    std_other, stats_back = standardize(other, stats)
    assert stats_back is stats
    assert np.allclose(std_other.features,
                       (other.features - stats.mean) / stats.std, atol=1e-15)


@pytest.mark.parametrize("T,expected", [
    (10, (7, 1, 2)),
    (100, (70, 15, 15)),
    (1620, (1134, 243, 243)),
])
def test_chronological_split_lengths(T, expected):
    frame = make_frame(np.random.default_rng(5).normal(size=(T, 5)))
    parts = chronological_split(frame, (0.7, 0.15, 0.15))
    assert tuple(len(p) for p in parts) == expected


def test_chronological_split_concatenates_back():
    frame = make_frame(np.random.default_rng(6).normal(size=(57, 5)))
    train, val, test = chronological_split(frame, (0.7, 0.15, 0.15))
    joined = np.concatenate([train.features, val.features, test.features])
    assert np.array_equal(joined, frame.features)
    dates = np.concatenate([train.dates, val.dates, test.dates])
    assert np.array_equal(dates, frame.dates)


def test_chronological_split_rejects_bad_fractions():
    frame = make_frame(np.zeros((10, 5)) + np.arange(10)[:, None])
    with pytest.raises(DataError, match="sum to 1"):
        chronological_split(frame, (0.5, 0.2, 0.2))
    with pytest.raises(DataError, match="positive"):
        chronological_split(frame, (1.0, 0.0, 0.0))


def test_chronological_split_min_length_guard():
    frame = make_frame(np.random.default_rng(7).normal(size=(20, 5)))
    with pytest.raises(DataError, match="shorter than"):
        chronological_split(frame, (0.7, 0.15, 0.15), min_length=5)


def _write_gridded(tmp_path, missing_cell=False):
    # 2 days x lats (55, 65, 75) x lons (0, 10); only 65/75 fall in the band
    from itertools import product

    for var in ("sit", "ssh", "u", "v", "vtot"):
        lines = ["date,lat,lon,value"]
        for di, (lat, lon) in product(range(2), product((55.0, 65.0, 75.0), (0.0, 10.0))):
            if missing_cell and var == "ssh" and di == 0 and lat == 65.0 and lon == 0.0:
                continue
            value = {"sit": 1.0, "ssh": lat + lon, "u": 0.1, "v": 0.2,
                     "vtot": 0.3}[var] + di
            lines.append(f"2020-01-0{di + 1},{lat},{lon},{value}")
        (tmp_path / f"{var}.csv").write_text("\n".join(lines) + "\n")
    return tmp_path


def test_gridded_ingest_end_to_end(tmp_path):
    from kgcm.config import load_config
    from kgcm.experiment import load_raw_frame

    _write_gridded(tmp_path)
    cfg = load_config(overrides=[f"data.grid_dir={tmp_path}",
                                 "data.lat_min=60", "data.lat_max=90"])
    frame = load_raw_frame(cfg)
    assert len(frame) == 2
    # ssh mean over cells {65+0, 65+10, 75+0, 75+10} = 75 on day 1
    assert frame.column("ssh")[0] == pytest.approx(75.0, abs=1e-12)
    assert frame.column("ssh")[1] == pytest.approx(76.0, abs=1e-12)
    assert frame.column("vtot")[0] == pytest.approx(0.3, abs=1e-12)


def test_gridded_ingest_missing_cell_excluded(tmp_path):
    from kgcm.config import load_config
    from kgcm.experiment import load_raw_frame

    _write_gridded(tmp_path, missing_cell=True)
    cfg = load_config(overrides=[f"data.grid_dir={tmp_path}",
                                 "data.lat_min=60", "data.lat_max=90"])
    frame = load_raw_frame(cfg)
    # cell (65, 0) absent on day 1: remaining cells are 65+10, 75+0, 75+10
    assert frame.column("ssh")[0] == pytest.approx((75.0 + 75.0 + 85.0) / 3, abs=1e-12)


def test_gridded_ingest_area_weighted(tmp_path):
    from kgcm.config import load_config
    from kgcm.experiment import load_raw_frame

    _write_gridded(tmp_path)
    cfg = load_config(overrides=[f"data.grid_dir={tmp_path}",
                                 "data.lat_min=60", "data.lat_max=90",
                                 "data.area_weighted=true"])
    frame = load_raw_frame(cfg)
    w65, w75 = np.cos(np.deg2rad(65.0)), np.cos(np.deg2rad(75.0))
    expected = (w65 * (65.0 + 65.0 + 10.0) + w75 * (75.0 + 75.0 + 10.0)) / (2 * (w65 + w75))
    assert frame.column("ssh")[0] == pytest.approx(expected, rel=1e-12)
