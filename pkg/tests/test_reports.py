"""Tests for CSV outputs and comparison tables"""

import math

import numpy as np
import pytest

from stnlab_common.errors import RejectedInputError
from stnlab_common.models import EpochRecord, TrainConfig

from experiments.alignment import AlignmentReport, AlignmentRow
from experiments.compare import Cell, CompareRow, cell_config, compare, depth_table
from experiments.reports import (
    ALIGNMENT_HEADER,
    HISTORY_HEADER,
    RUNS_HEADER,
    SWEEP_HEADER,
    compare_header,
    confusion_header,
    fmt,
    read_csv,
    write_alignment,
    write_compare,
    write_confusion,
    write_history,
    write_runs,
    write_sweep,
)
from experiments.sweep import AngleSweep, SweepRow


def test_fmt():
    """Test six decimals, no negative zero, empty for missing"""
    assert fmt(0.25) == "0.250000"
    assert fmt(-1e-9) == "0.000000"
    assert fmt(None) == ""
    assert fmt(float("nan")) == ""
    assert fmt(math.inf) == "inf"


def test_history_csv(tmp_path):
    """Test the history file layout byte for byte"""
    path = tmp_path / "history.csv"
    write_history(path, [EpochRecord(epoch=1, loss=0.5, accuracy=0.75)])
    assert path.read_bytes() == b"epoch,loss,accuracy\n1,0.500000,0.750000\n"
    assert read_csv(path, HISTORY_HEADER) == [["1", "0.500000", "0.750000"]]


def test_confusion_csv(tmp_path):
    """Test one row per true label"""
    path = tmp_path / "confusion.csv"
    write_confusion(path, np.array([[3, 1], [0, 2]]))
    assert read_csv(path, confusion_header(2)) == [["0", "3", "1"], ["1", "0", "2"]]


def test_alignment_csv(tmp_path):
    """Test alignment rows keep their column order"""
    report = AlignmentReport(layer=1, permutation=(0,), rows=[AlignmentRow(0, 1.0, 0.5, 180.0, -1.0, 2.0, 0.01)])
    path = tmp_path / "alignment.csv"
    write_alignment(path, report)
    assert read_csv(path, ALIGNMENT_HEADER) == [
        ["0", "1.000000", "0.500000", "180.000000", "-1.000000", "2.000000", "0.010000"]
    ]


def test_missing_prediction_is_empty_field(tmp_path):
    """Test a missing predicted angle leaves the field empty"""
    sweep = AngleSweep("stn_sl1", rows=[SweepRow(0, 0.5, None, "stn_sl1")])
    path = tmp_path / "sweep.csv"
    write_sweep(path, sweep)
    assert read_csv(path, SWEEP_HEADER) == [["0", "0.500000", "", "stn_sl1", "pull_negated"]]


def test_strict_reader(tmp_path):
    """Test wrong headers, CR line endings and ragged rows are rejected"""
    path = tmp_path / "bad.csv"
    path.write_bytes(b"a,b\r\n1,2\r\n")
    with pytest.raises(RejectedInputError, match="carriage return"):
        read_csv(path)
    path.write_bytes(b"a,b\n1\n")
    with pytest.raises(RejectedInputError, match="line 2"):
        read_csv(path)
    path.write_bytes(b"a,b\n1,2\n")
    with pytest.raises(RejectedInputError, match="header"):
        read_csv(path, ["a", "c"])


def test_compare_and_runs_csv(tmp_path):
    """Test the comparison table has one column per augmentation"""
    rows = [CompareRow("cnn", "plain", 0, {"rotation": 0.1}), CompareRow("stn_c1", "stn_cX", 1, {"rotation": 0.05})]
    write_compare(tmp_path / "compare.csv", ["rotation"], rows)
    assert read_csv(tmp_path / "compare.csv", compare_header(["rotation"])) == [
        ["cnn", "plain", "0", "0.100000"],
        ["stn_c1", "stn_cX", "1", "0.050000"],
    ]
    write_runs(tmp_path / "runs.csv", [("cnn", "rotation", 1, 0.1)])
    assert read_csv(tmp_path / "runs.csv", RUNS_HEADER) == [["cnn", "rotation", "1", "0.100000"]]


def test_depth_table_pivot():
    """Test stn_c0 fills both columns of the X=0 row"""
    rows = [
        CompareRow("cnn", "plain", 0, {"rotation": 0.3}),
        CompareRow("stn_c0", "stn_c0", 0, {"rotation": 0.2}),
        CompareRow("stn_c1", "stn_cX", 1, {"rotation": 0.1}),
        CompareRow("stn_sl1", "stn_slX", 1, {"rotation": 0.15}),
        CompareRow("stn_sl2", "stn_slX", 2, {"rotation": 0.12}),
    ]
    assert depth_table(rows, "rotation") == [(0, 0.2, 0.2), (1, 0.1, 0.15), (2, None, 0.12)]


def base_config(**overrides) -> TrainConfig:
    values = dict(
        seed=1,
        model="cnn",
        epochs=1,
        batch_size=4,
        learning_rate=1e-3,
        optimizer="adam",
        dataset="glyphs",
        augmentation="rotation",
        augmentation_range=0.5,
        canvas=16,
        train_limit=8,
        test_limit=4,
    )
    values.update(overrides)
    return TrainConfig(**values)


def test_cell_config_carries_range_only_for_same_kind():
    """Test an explicit range applies to its own augmentation kind"""
    base = base_config()
    assert cell_config(base, Cell("stn_c0", "rotation", 2)).augmentation_range == 0.5
    translated = cell_config(base, Cell("stn_c0", "translation", 2))
    assert translated.augmentation_range is None
    assert translated.resolved_range() == 8.0
    assert (translated.model, translated.seed) == ("stn_c0", 2)


def test_compare_is_independent_of_workers():
    """Test serial and threaded comparisons agree"""
    base = base_config()
    serial = compare(base, ["cnn", "stn_sl1"], ["none", "rotation"], [1, 2])
    threaded = compare(base, ["cnn", "stn_sl1"], ["none", "rotation"], [1, 2], workers=3)
    assert serial.runs == threaded.runs
    assert [row.errors for row in serial.rows] == [row.errors for row in threaded.rows]
    assert [row.model for row in serial.rows] == ["cnn", "stn_sl1"]
    assert len(serial.runs) == 8
    for row in serial.rows:
        assert set(row.errors) == {"none", "rotation"}
        assert all(0.0 <= value <= 1.0 for value in row.errors.values())
