"""Train/test datasets for a run configuration"""

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from stnlab_common.config import get_settings
from stnlab_common.models import TrainConfig
from stnlab_common.seeding import stream
from stnlab_core.data import LabeledDataset, apply_random_transform, load_mnist_split, pad_to_canvas
from stnlab_core.glyphs import glyphs_as_dataset, make_glyph_dataset

logger = logging.getLogger(__name__)


def resolve_data_dir(data_dir: Optional[Path]) -> Path:
    """Explicit directory, else STNLAB_DATA"""
    if data_dir is not None:
        return Path(data_dir)
    settings = get_settings()
    if settings.data is None:
        raise FileNotFoundError("no data directory given and STNLAB_DATA is not set")
    return settings.data


def random_subset(ds: LabeledDataset, limit: int, seed: int, name: str) -> LabeledDataset:
    """``limit`` examples drawn without replacement, kept in file order"""
    if limit >= len(ds):
        return ds
    chosen = stream(seed, name).choice(len(ds), size=limit, replace=False)
    return ds.subset(np.sort(chosen))


def base_split(cfg: TrainConfig, split: str, data_dir: Optional[Path] = None) -> LabeledDataset:
    """Unaugmented split on the configured canvas"""
    limit = cfg.train_limit if split == "train" else cfg.test_limit
    if cfg.dataset == "glyphs":
        return glyphs_as_dataset(make_glyph_dataset(limit, cfg.canvas, cfg.seed, f"glyphs/{split}"))
    ds = load_mnist_split(resolve_data_dir(data_dir), split)
    ds = random_subset(ds, limit, cfg.seed, f"subset/{split}")
    return pad_to_canvas(ds, cfg.canvas)


def augment(ds: LabeledDataset, cfg: TrainConfig, split: str) -> LabeledDataset:
    return apply_random_transform(
        ds, cfg.augmentation, cfg.resolved_range(), cfg.seed, f"augment/{split}"
    )


def prepare_datasets(
    cfg: TrainConfig, data_dir: Optional[Path] = None
) -> Tuple[LabeledDataset, LabeledDataset]:
    train = augment(base_split(cfg, "train", data_dir), cfg, "train")
    test = augment(base_split(cfg, "test", data_dir), cfg, "test")
    logger.info(
        "Prepared datasets",
        extra={
            "dataset": cfg.dataset,
            "augmentation": cfg.augmentation,
            "range": cfg.resolved_range(),
            "train": len(train),
            "test": len(test),
        },
    )
    return train, test
