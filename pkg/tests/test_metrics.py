import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellml.metrics import (
    MetricsReport,
    atomic_write_text,
    build_report,
    confusion_matrix,
    emit_metrics,
    fmt,
    load_metrics,
    mismatch_grid,
    round12,
)


def test_fmt_twelve_significant_digits():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(2.0) == "2"
    assert fmt(float("nan")) == "nan"
    assert fmt(123456789.123456789) == "123456789.123"
    assert round12(math.pi) == 3.14159265359


def test_confusion_rows_sum_to_class_counts():
    y = np.array([0, 0, 1, 2, 2, 2])
    cm = confusion_matrix(y, [0, 1, 1, 2, 0, 2], 3)
    assert cm.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 2]]
    np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(y, minlength=3))


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=200))
def test_report_invariants(pairs):
    y, pred = map(np.array, zip(*pairs))
    rep = build_report(y, pred, 4)
    assert 0 <= rep.match_rate <= 1
    assert rep.match_rate == pytest.approx(np.mean(y == pred))
    assert rep.match_rate + rep.mismatch_rate == pytest.approx(1.0)
    np.testing.assert_array_equal(rep.confusion.sum(axis=1), np.bincount(y, minlength=4))
    assert np.trace(rep.confusion) == np.sum(y == pred)


def test_mismatch_grid_cells():
    p = np.array([0.01, 0.02, 0.99, 0.5])
    theta = np.array([0.01, 0.02, math.pi, math.pi / 2])
    grid, counts = mismatch_grid(p, theta, np.array([True, False, True, False]), 2)
    assert counts.tolist() == [[2, 0], [0, 2]]
    assert grid[0, 0] == 0.5 and grid[1, 1] == 0.5
    assert math.isnan(grid[0, 1]) and math.isnan(grid[1, 0])


def test_group_rates():
    meta = {"group": np.array(["I", "I", "II", "III"])}
    rep = build_report([0, 0, 0, 1], [0, 1, 0, 1], 2, meta)
    assert rep.group_rates == {"I": 0.5, "II": 1.0, "III": 1.0}
    assert rep.group_counts == {"I": 2, "II": 1, "III": 1}


def _sample_report(res=5):
    rng = np.random.default_rng(0)
    n = 400
    y = rng.integers(0, 2, n)
    pred = np.where(rng.uniform(size=n) < 0.8, y, 1 - y)
    meta = {"p": rng.uniform(size=n), "theta": rng.uniform(0, math.pi, n), "group": rng.choice(["I", "II"], n)}
    rep = build_report(y, pred, 2, meta, res)
    rep.loss_history = [0.9, 0.5 / 3, 0.1234567890123456]
    rep.info = {"experiment": "E1", "edge_width": 0.02, "hidden": 0}
    return rep


def test_emit_and_load_round_trip(tmp_path):
    rep = _sample_report()
    paths = emit_metrics(rep, tmp_path / "m.json")
    assert [p.name for p in paths] == ["m.json", "m_heatmap.csv"]
    back = load_metrics(tmp_path / "m.json")
    assert back == rep
    assert back.info["experiment"] == "E1"


def test_heatmap_csv_has_resolution_squared_rows(tmp_path):
    emit_metrics(_sample_report(7), tmp_path / "m.json")
    with open(tmp_path / "m_heatmap.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["p", "theta", "r_mm", "count"]
    assert len(rows) == 1 + 49
    # p varies slowest
    assert rows[1][0] == rows[7][0] != rows[8][0]


def test_emitted_json_is_sorted_and_rounded(tmp_path):
    emit_metrics(_sample_report(), tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
    assert doc["loss_history"][2] == 0.123456789012
    assert doc["heatmap"] == {"file": "m_heatmap.csv", "resolution": 5}


def test_emit_overwrites_atomically(tmp_path):
    rep = _sample_report()
    emit_metrics(rep, tmp_path / "m.json")
    first = (tmp_path / "m.json").read_bytes()
    rep.info["experiment"] = "E2"
    emit_metrics(rep, tmp_path / "m.json")
    assert (tmp_path / "m.json").read_bytes() != first
    assert sorted(p.name for p in tmp_path.iterdir()) == ["m.json", "m_heatmap.csv"]


def test_emit_is_byte_stable(tmp_path):
    emit_metrics(_sample_report(), tmp_path / "a.json")
    emit_metrics(_sample_report(), tmp_path / "b.json")
    a = (tmp_path / "a.json").read_text().replace("a_heatmap", "X")
    b = (tmp_path / "b.json").read_text().replace("b_heatmap", "X")
    assert a == b
    assert (tmp_path / "a_heatmap.csv").read_bytes() == (tmp_path / "b_heatmap.csv").read_bytes()


def test_atomic_write_leaves_no_temp_on_failure(tmp_path, monkeypatch):
    import os

    target = tmp_path / "x.txt"
    atomic_write_text(target, "old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(target, "new")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_load_rejects_short_heatmap(tmp_path):
    emit_metrics(_sample_report(), tmp_path / "m.json")
    lines = (tmp_path / "m_heatmap.csv").read_text().splitlines()
    (tmp_path / "m_heatmap.csv").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        load_metrics(tmp_path / "m.json")


def test_report_equality_uses_stored_precision():
    a = MetricsReport(10, 0.1 + 0.2, np.eye(2, dtype=int))
    b = MetricsReport(10, 0.3, np.eye(2, dtype=int))
    assert a == b
    assert a != MetricsReport(10, 0.31, np.eye(2, dtype=int))
