"""Model x augmentation x seed comparison tables"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stnlab_common.models import TrainConfig
from stnlab_core.data import LabeledDataset
from stnlab_core.networks import spec_for

from experiments.datasets import prepare_datasets
from experiments.evaluation import evaluate
from experiments.trainer import train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    model: str
    augmentation: str
    seed: int


@dataclass
class CompareRow:
    model: str
    variant: str
    depth: int
    errors: Dict[str, float] = field(default_factory=dict)


@dataclass
class CompareResult:
    augmentations: List[str]
    rows: List[CompareRow]
    runs: List[Tuple[str, str, int, float]]


def cell_config(base: TrainConfig, cell: Cell) -> TrainConfig:
    """The base configuration with the cell's model, augmentation and seed.

    An explicit augmentation range only carries over to cells of the same kind.
    """
    values = base.model_dump()
    values.update(model=cell.model, augmentation=cell.augmentation, seed=cell.seed)
    if cell.augmentation != base.augmentation:
        values["augmentation_range"] = None
    return TrainConfig.model_validate(values)


def run_cell(cfg: TrainConfig, train_data: LabeledDataset, test_data: LabeledDataset) -> float:
    spec = spec_for(
        cfg.model,
        cfg.backbone,
        cfg.loc_mode,
        input_shape=train_data.image_shape,
        num_classes=train_data.num_classes,
    )
    result = train(spec, cfg, train_data)
    error_rate = evaluate(result.model, test_data).error_rate
    logger.info(
        "Cell complete",
        extra={"model": cfg.model, "augmentation": cfg.augmentation, "seed": cfg.seed, "error_rate": error_rate},
    )
    return error_rate


def compare(
    base: TrainConfig,
    models: Sequence[str],
    augmentations: Sequence[str],
    seeds: Sequence[int],
    data_dir: Optional[Path] = None,
    workers: int = 1,
) -> CompareResult:
    """Train every (model, augmentation, seed) cell and take per-cell medians over seeds.

    Datasets are built once per (augmentation, seed) before training fans out;
    results are assembled by key, never by completion order.
    """
    cells = [Cell(m, a, s) for m in models for a in augmentations for s in seeds]
    for cell in cells:
        spec_for(cell.model, base.backbone, base.loc_mode)
    datasets: Dict[Tuple[str, int], Tuple[LabeledDataset, LabeledDataset]] = {}
    for augmentation in augmentations:
        for seed in seeds:
            cfg = cell_config(base, Cell(models[0], augmentation, seed))
            datasets[(augmentation, seed)] = prepare_datasets(cfg, data_dir)

    def run(cell: Cell) -> float:
        train_data, test_data = datasets[(cell.augmentation, cell.seed)]
        return run_cell(cell_config(base, cell), train_data, test_data)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = dict(zip(cells, pool.map(run, cells)))
    else:
        errors = {cell: run(cell) for cell in cells}

    rows = []
    for model in models:
        spec = spec_for(model, base.backbone, base.loc_mode)
        medians = {
            a: float(np.median([errors[Cell(model, a, s)] for s in seeds])) for a in augmentations
        }
        rows.append(CompareRow(model, spec.variant, spec.depth, medians))
    runs = [(c.model, c.augmentation, c.seed, errors[c]) for c in cells]
    return CompareResult(list(augmentations), rows, runs)


def depth_table(
    rows: Sequence[CompareRow], augmentation: str
) -> List[Tuple[int, Optional[float], Optional[float]]]:
    """Pivot into (depth, stn_cX, stn_slX); stn_c0 fills both columns of the X=0 row"""
    by_depth: Dict[int, List[Optional[float]]] = {}
    for row in rows:
        value = row.errors.get(augmentation)
        if row.variant == "plain":
            continue
        entry = by_depth.setdefault(row.depth, [None, None])
        if row.variant == "stn_c0":
            entry[0] = entry[1] = value
        elif row.variant == "stn_cX":
            entry[0] = value
        else:
            entry[1] = value
    return [(depth, c, sl) for depth, (c, sl) in sorted(by_depth.items())]
