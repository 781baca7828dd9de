import json

import numpy as np
import pytest

from gwindcast.core import LevelSpec, StationTable, WindSeries
from gwindcast.errors import EmptyInput, Misaligned, ShapeMismatch
from gwindcast.metrics import (
    MetricReport,
    evaluate_series,
    mae,
    mosaic_table,
    pearson_cells,
    pearson_r,
    read_report,
    rmse,
    rmspe,
    rmspe_cells,
    write_mosaic_tables,
    write_report,
)
from reference_impls import (
    loop_mae,
    loop_pearson,
    loop_pearson_cells,
    loop_rmse,
    loop_rmspe_cells,
)


def test_worked_example_triple():
    truth = np.array([1.0, 2.0, 3.0])
    pred = np.array([1.0, 2.0, 5.0])
    assert rmse(pred, truth) == pytest.approx(1.1547005383792515, abs=1e-15)
    assert mae(pred, truth) == pytest.approx(2.0 / 3.0, abs=1e-15)
    # single cell: temporal RMSE over truth range 2
    assert rmspe(pred.reshape(3, 1), truth.reshape(3, 1)) == pytest.approx(
        0.5773502691896257, abs=1e-15
    )
    assert pearson_r(pred.reshape(3, 1), truth.reshape(3, 1)) == pytest.approx(
        0.9607689228305226, abs=1e-15
    )


def test_metrics_match_loop_oracles_on_random_arrays():
    rng = np.random.default_rng(123)
    for _ in range(200):
        n_t = int(rng.integers(3, 12))
        n_c = int(rng.integers(1, 6))
        truth = rng.normal(size=(n_t, n_c))
        pred = truth + rng.normal(scale=0.5, size=(n_t, n_c))
        assert rmse(pred, truth) == pytest.approx(loop_rmse(truth, pred), rel=1e-12)
        assert mae(pred, truth) == pytest.approx(loop_mae(truth, pred), rel=1e-12)
        want, n_want = loop_rmspe_cells(truth, pred)
        got = rmspe(pred, truth)
        assert got == pytest.approx(want, rel=1e-12)
        wantp, _ = loop_pearson_cells(truth, pred)
        assert pearson_r(pred, truth) == pytest.approx(wantp, rel=1e-12)


def test_rmse_mae_pool_all_cells():
    truth = np.zeros((2, 3))
    pred = np.ones((2, 3)) * 2.0
    assert rmse(pred, truth) == pytest.approx(2.0)
    assert mae(pred, truth) == pytest.approx(2.0)


def test_metrics_reject_mismatched_or_empty():
    with pytest.raises(ShapeMismatch):
        rmse(np.zeros(3), np.zeros(4))
    with pytest.raises(EmptyInput):
        rmse(np.zeros(0), np.zeros(0))


def test_rmspe_excludes_degenerate_cells_and_counts():
    truth = np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]])  # cell 1 constant
    pred = truth + 1.0
    values, valid = rmspe_cells(pred, truth)
    assert valid.tolist() == [True, False]
    assert values[0] == pytest.approx(1.0 / 2.0)  # RMSE 1 over range 2
    assert np.isnan(values[1])
    assert rmspe(pred, truth) == pytest.approx(0.5)


def test_pearson_excludes_constant_series():
    truth = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    pred = np.array([[2.0, 1.0], [4.0, 2.0], [6.0, 3.0]])
    values, valid = pearson_cells(pred, truth)
    assert valid.tolist() == [True, False]
    assert values[0] == pytest.approx(1.0)
    assert pearson_r(pred, truth) == pytest.approx(1.0)


def test_all_cells_degenerate_raises():
    from gwindcast.errors import AllCellsDegenerate

    truth = np.ones((3, 2))
    with pytest.raises(AllCellsDegenerate):
        rmspe(truth + 1.0, truth)


def test_pearson_sign_and_range():
    rng = np.random.default_rng(5)
    x = rng.normal(size=50)
    assert pearson_r((2 * x + 3).reshape(-1, 1), x.reshape(-1, 1)) == pytest.approx(1.0)
    assert pearson_r((-x).reshape(-1, 1), x.reshape(-1, 1)) == pytest.approx(-1.0)
    for _ in range(20):
        a = rng.normal(size=(30, 1))
        b = rng.normal(size=(30, 1))
        r = pearson_r(a, b)
        assert -1.0 - 1e-12 <= r <= 1.0 + 1e-12
        assert r == pytest.approx(loop_pearson(b.ravel(), a.ravel()), rel=1e-10)


def make_series(values, levels=("height_m", (100.0, 500.0)), times=None):
    values = np.asarray(values, dtype=float)
    n_t, n_l, n_s, _ = values.shape
    st = StationTable(
        ids=tuple(f"W{i}" for i in range(n_s)),
        lats=29.0 + 0.01 * np.arange(n_s),
        lons=120.0 + 0.01 * np.arange(n_s),
    )
    if times is None:
        times = 300 * np.arange(n_t)
    return WindSeries(
        times=np.asarray(times, np.int64),
        levels=LevelSpec(levels[0], levels[1][:n_l]),
        stations=st,
        values=values,
        mask=np.ones(values.shape, bool),
    )


def test_evaluate_series_rows_cover_levels_components_and_all():
    rng = np.random.default_rng(9)
    truth = make_series(rng.normal(size=(20, 2, 3, 3)))
    pred = make_series(truth.values + rng.normal(scale=0.1, size=truth.values.shape))
    report = evaluate_series(pred, truth, lead_minutes=10.0)
    labels = {(r.level, r.component) for r in report.rows}
    for lev in ("100", "500", "all"):
        for comp in ("u", "v", "w"):
            assert (lev, comp) in labels
    assert ("all", "all") in labels
    assert report.lead_minutes == 10.0
    row = report.row("100", "u")
    want = rmse(pred.values[:, 0, :, 0], truth.values[:, 0, :, 0])
    assert row.rmse == pytest.approx(want, rel=1e-12)
    # per-component "all" pools both levels
    row_all = report.row("all", "u")
    want_all = rmse(pred.values[:, :, :, 0], truth.values[:, :, :, 0])
    assert row_all.rmse == pytest.approx(want_all, rel=1e-12)


def test_evaluate_series_requires_alignment():
    rng = np.random.default_rng(2)
    truth = make_series(rng.normal(size=(5, 1, 2, 3)))
    moved = make_series(truth.values, times=300 * np.arange(5) + 300)
    with pytest.raises(Misaligned):
        evaluate_series(moved, truth, 5.0)


def test_report_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    truth = make_series(rng.normal(size=(10, 1, 2, 3)))
    pred = make_series(truth.values + 0.1)
    report = evaluate_series(pred, truth, 15.0)
    path = tmp_path / "report.json"
    write_report(path, report)
    loaded = read_report(path)
    assert loaded.lead_minutes == report.lead_minutes
    for a, b in zip(report.rows, loaded.rows):
        assert a.level == b.level and a.component == b.component
        assert a.rmse == b.rmse and a.mae == b.mae
        assert (a.rmspe == b.rmspe) or (np.isnan(a.rmspe) and np.isnan(b.rmspe))
    raw = json.loads(path.read_text())
    assert set(raw) == {"lead_minutes", "level_labels", "rows"}


def test_mosaic_table_layout(tmp_path):
    rng = np.random.default_rng(6)
    reports = {}
    for lead in (5.0, 10.0):
        truth = make_series(rng.normal(size=(12, 2, 2, 3)))
        pred = make_series(truth.values + rng.normal(scale=0.2, size=truth.values.shape))
        reports[lead] = evaluate_series(pred, truth, lead)
    table = mosaic_table(reports, "rmse", "u")
    lines = table.strip().split("\n")
    assert lines[0] == "level,lead_5min,lead_10min"
    assert lines[1].startswith("100,")
    assert lines[2].startswith("500,")
    assert len(lines) == 1 + 2  # header plus one row per level

    paths = write_mosaic_tables(tmp_path, reports)
    assert len(paths) == 12  # 4 metrics x 3 components
    names = {p.name if hasattr(p, "name") else str(p).split("/")[-1] for p in paths}
    assert "mosaic_rmse_u.csv" in names
    assert "mosaic_r_w.csv" in names
    # each lead's column values match its report
    body = (tmp_path / "mosaic_rmse_u.csv").read_text().strip().split("\n")
    first_val = float(body[1].split(",")[1])
    # values are printed with 9 significant digits
    assert first_val == pytest.approx(reports[5.0].row("100", "u").rmse, rel=1e-7)
