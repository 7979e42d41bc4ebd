"""CSV outputs: fixed headers, '.' decimals with six places, '\\n' line endings"""

import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_common.models import EpochRecord

from experiments.alignment import AlignmentReport
from experiments.sweep import AngleSweep

PathLike = Union[str, Path]

HISTORY_HEADER = ["epoch", "loss", "accuracy"]
ALIGNMENT_HEADER = [
    "example",
    "residual_aligned",
    "residual_best_spatial",
    "best_rotation_deg",
    "best_dy",
    "best_dx",
    "channel_swap_residual",
]
SWEEP_HEADER = ["example", "applied_angle", "predicted_angle", "variant", "sign_convention"]
RUNS_HEADER = ["model", "augmentation", "seed", "error_rate"]
DEPTH_HEADER = ["depth", "stn_cX", "stn_slX"]


def fmt(value: Optional[float]) -> str:
    """Locale-independent fixed-point float; empty for a missing value"""
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return ""
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv(path: PathLike, header: Optional[Sequence[str]] = None) -> List[List[str]]:
    """Rows under a strict reading: exact header, '\\n' endings, constant width"""
    raw = Path(path).read_bytes().decode("utf-8")
    if "\r" in raw:
        raise RejectedInputError(f"{path}: carriage return in CSV")
    rows = list(csv.reader(raw.splitlines()))
    if not rows:
        raise RejectedInputError(f"{path}: empty CSV")
    if header is not None and rows[0] != list(header):
        raise RejectedInputError(f"{path}: header {rows[0]} != {list(header)}")
    width = len(rows[0])
    for number, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise RejectedInputError(f"{path}: line {number} has {len(row)} fields, expected {width}")
    return rows[1:]


def write_history(path: PathLike, history: Sequence[EpochRecord]) -> None:
    write_csv(path, HISTORY_HEADER, ([r.epoch, fmt(r.loss), fmt(r.accuracy)] for r in history))


def confusion_header(num_classes: int) -> List[str]:
    return ["true_label"] + [f"pred_{k}" for k in range(num_classes)]


def write_confusion(path: PathLike, confusion: np.ndarray) -> None:
    write_csv(
        path,
        confusion_header(confusion.shape[1]),
        ([label] + [int(v) for v in row] for label, row in enumerate(confusion)),
    )


def write_alignment(path: PathLike, report: AlignmentReport) -> None:
    write_csv(
        path,
        ALIGNMENT_HEADER,
        (
            [
                row.example,
                fmt(row.residual_aligned),
                fmt(row.residual_best_spatial),
                fmt(row.best_rotation_deg),
                fmt(row.best_dy),
                fmt(row.best_dx),
                fmt(row.channel_swap_residual),
            ]
            for row in report.rows
        ),
    )


def write_sweep(path: PathLike, sweep: AngleSweep) -> None:
    write_csv(
        path,
        SWEEP_HEADER,
        (
            [row.example, fmt(row.applied_angle), fmt(row.predicted_angle), row.variant, row.sign_convention]
            for row in sweep.rows
        ),
    )


def compare_header(augmentations: Sequence[str]) -> List[str]:
    return ["model", "variant", "depth"] + list(augmentations)


def write_compare(path: PathLike, augmentations: Sequence[str], rows: Iterable) -> None:
    """One row per model: median error rate per augmentation column"""
    write_csv(
        path,
        compare_header(augmentations),
        (
            [row.model, row.variant, row.depth] + [fmt(row.errors.get(a)) for a in augmentations]
            for row in rows
        ),
    )


def write_runs(path: PathLike, runs: Iterable[Sequence[object]]) -> None:
    write_csv(path, RUNS_HEADER, ([model, aug, seed, fmt(err)] for model, aug, seed, err in runs))


def write_depth(path: PathLike, rows: Iterable[Sequence[object]]) -> None:
    write_csv(path, DEPTH_HEADER, ([depth, fmt(c), fmt(sl)] for depth, c, sl in rows))
