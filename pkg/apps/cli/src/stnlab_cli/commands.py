"""Subcommand handlers; each returns a process exit code"""

import argparse
import logging
import math
import sys
import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from stnlab_common import __version__
from stnlab_common.config import get_settings
from stnlab_common.errors import (
    CheckpointError,
    ConfigParseError,
    DivergenceError,
    IdxFormatError,
    IncompatibleCheckpointError,
    RejectedInputError,
    RejectedSpecError,
)
from stnlab_common.models import NetworkSpec, RunManifest, TrainConfig
from stnlab_core import checkpoint
from stnlab_core.data import LabeledDataset, load_mnist_split, pad_to_canvas
from stnlab_core.glyphs import glyphs_as_dataset, make_glyph_dataset
from stnlab_core.networks import ModelInstance, spec_for
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import AffineParams

from experiments.alignment import alignment_analysis
from experiments.compare import compare, depth_table
from experiments.datasets import augment, base_split, random_subset, resolve_data_dir
from experiments.detector import build_glyph_detector
from experiments.evaluation import evaluate
from experiments.reports import (
    write_alignment,
    write_compare,
    write_confusion,
    write_depth,
    write_history,
    write_runs,
    write_sweep,
)
from experiments.rendering import MAX_EXAMPLES, render_alignment_grid, write_pgm
from experiments.sweep import angle_sweep, sweep_angles
from experiments.trainer import train
from stnlab_cli.configfile import format_config, load_train_config
from stnlab_cli.manifest import hash_outputs, write_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_INCOMPATIBLE = 5

GLYPH_SEED = 0


def run_command(handler: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Map failure classes to disjoint exit codes"""
    try:
        return handler(args)
    except ConfigParseError as exc:
        return _fail(EXIT_CONFIG, "Configuration error", exc)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, "Training diverged", exc)
    except (IncompatibleCheckpointError, RejectedSpecError) as exc:
        return _fail(EXIT_INCOMPATIBLE, "Incompatible checkpoint or spec", exc)
    except (IdxFormatError, CheckpointError, OSError) as exc:
        return _fail(EXIT_DATA, "Data error", exc)
    except RejectedInputError as exc:
        return _fail(EXIT_CONFIG, "Rejected run parameters", exc)
    except Exception as exc:
        logger.error("Unexpected failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


def _fail(code: int, what: str, exc: Exception) -> int:
    logger.error(what, extra={"error": str(exc), "exit_code": code})
    print(f"error: {exc}", file=sys.stderr)
    return code


def _out_dir(path: Optional[str], fallback: Path) -> Path:
    out = Path(path) if path else fallback
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(
    out: Path,
    command: str,
    outputs: List[str],
    started: float,
    seed: Optional[int] = None,
    cfg: Optional[TrainConfig] = None,
    spec: Optional[NetworkSpec] = None,
) -> None:
    manifest = RunManifest(
        command=command,
        code_version=__version__,
        seed=seed,
        config={k: "" if v is None else str(v) for k, v in (cfg.model_dump() if cfg else {}).items()},
        spec_json=spec.model_dump_json() if spec else None,
        outputs=hash_outputs(out, outputs),
        wall_clock_seconds=time.perf_counter() - started,
    )
    path = write_manifest(out, manifest)
    logger.info("Run complete", extra={"command": command, "manifest": str(path), "outputs": outputs})


def _int_list(text: str, what: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigParseError(f"--{what}: expected comma-separated integers, got {text!r}") from exc


def _name_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _load_model(args: argparse.Namespace) -> ModelInstance:
    if not args.checkpoint:
        raise ConfigParseError("--checkpoint is required")
    return checkpoint.load(args.checkpoint)


def _check_fits(ds: LabeledDataset, spec: NetworkSpec) -> LabeledDataset:
    if tuple(ds.image_shape) != tuple(spec.input_shape):
        raise IncompatibleCheckpointError(
            f"data images {ds.image_shape} do not fit network input {tuple(spec.input_shape)}"
        )
    if ds.labels.size and ds.labels.max() >= spec.num_classes:
        raise IncompatibleCheckpointError(
            f"labels reach {int(ds.labels.max())} but the network has {spec.num_classes} classes"
        )
    return ds


def load_test_data(
    args: argparse.Namespace,
    spec: NetworkSpec,
    limit: Optional[int] = None,
    augmented: bool = True,
) -> LabeledDataset:
    """Evaluation data for a loaded model: a run config's test split, glyphs, or MNIST test.

    With ``augmented=False`` a run config's test split is returned upright, for analyses
    that apply their own known transform.
    """
    data_dir = Path(args.data) if args.data else None
    if args.config:
        cfg = load_train_config(args.config)
        ds = base_split(cfg, "test", data_dir)
        if augmented:
            ds = augment(ds, cfg, "test")
    elif getattr(args, "glyphs", None):
        seed = GLYPH_SEED if args.seed is None else args.seed
        ds = glyphs_as_dataset(make_glyph_dataset(args.glyphs, spec.input_shape[1], seed))
    else:
        ds = load_mnist_split(resolve_data_dir(data_dir), "test")
        if limit is not None:
            ds = random_subset(ds, limit, args.seed or 0, "subset/test")
        if ds.images.shape[2] <= spec.input_shape[1]:
            ds = pad_to_canvas(ds, spec.input_shape[1])
    if limit is not None:
        ds = ds.head(limit)
    return _check_fits(ds, spec)


def cmd_train(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if not args.config or not args.out:
        raise ConfigParseError("train needs --config and --out")
    cfg = load_train_config(args.config)
    if args.seed is not None:
        cfg = TrainConfig.model_validate({**cfg.model_dump(), "seed": args.seed})
    data = augment(base_split(cfg, "train", Path(args.data) if args.data else None), cfg, "train")
    try:
        spec = spec_for(cfg.model, cfg.backbone, cfg.loc_mode, data.image_shape, data.num_classes)
    except RejectedSpecError as exc:
        raise ConfigParseError(str(exc), key="model") from exc

    result = train(spec, cfg, data)
    out = _out_dir(args.out, Path("."))
    checkpoint.save(result.model, out / "model.ckpt")
    write_history(out / "history.csv", result.history)
    (out / "config.txt").write_text(format_config(cfg), encoding="utf-8")
    _finish(out, "train", ["model.ckpt", "history.csv", "config.txt"], started, cfg.seed, cfg, spec)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    model = _load_model(args)
    data = load_test_data(args, model.spec)
    result = evaluate(model, data, workers=args.workers or get_settings().workers)
    out = _out_dir(args.out, Path(args.checkpoint).parent)
    write_confusion(out / "confusion.csv", result.confusion)
    print(f"error_rate,{result.error_rate:.4f}")
    _finish(out, "eval", ["confusion.csv"], started, args.seed, spec=model.spec)
    return EXIT_OK


def _transform(args: argparse.Namespace, height: int, width: int) -> AffineParams:
    if args.shift:
        dy, dx = _int_list(args.shift, "shift")
        return AffineParams.translation([(dy, dx)], height, width)
    degrees = 180.0 if args.rotation is None else args.rotation
    return AffineParams.rotation([math.radians(degrees)])


def cmd_align(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if args.glyphs:
        model = build_glyph_detector(args.size)
        permutation: Optional[Sequence[int]] = (1, 0)
    else:
        model = _load_model(args)
        permutation = None
    if args.permutation:
        permutation = _int_list(args.permutation, "permutation")
    data = load_test_data(args, model.spec, limit=args.digits, augmented=False)
    _, height, width = model.spec.input_shape
    transform = _transform(args, height, width)

    report = alignment_analysis(
        model, args.layer, transform, data.images, permutation, workers=args.workers or get_settings().workers
    )
    out = _out_dir(args.out, Path("."))
    write_alignment(out / "alignment.csv", report)
    shown = data.images.data[:MAX_EXAMPLES]
    grid = render_alignment_grid(model, Tensor(shown), transform, layer=args.layer, channel=args.channel)
    write_pgm(out / "alignment.pgm", grid)
    for column in ("residual_aligned", "residual_best_spatial", "channel_swap_residual"):
        print(f"{column},{report.median(column):.4f}")
    _finish(out, "align", ["alignment.csv", "alignment.pgm"], started, args.seed, spec=model.spec)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    model = _load_model(args)
    if model.spec.variant == "plain":
        raise IncompatibleCheckpointError("angle sweep needs a spatial transformer checkpoint")
    digits = load_test_data(args, model.spec, limit=args.digits, augmented=False)
    sweep = angle_sweep(
        model,
        digits,
        sweep_angles(args.angles),
        batch_size=get_settings().batch_size_eval,
        workers=args.workers or get_settings().workers,
    )
    out = _out_dir(args.out, Path("."))
    write_sweep(out / "sweep.csv", sweep)
    print(f"correlation,{sweep.correlation:.4f}")
    print(f"correlation_any_sign,{sweep.correlation_any_sign:.4f}")
    _finish(out, "sweep", ["sweep.csv"], started, args.seed, spec=model.spec)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if not args.config:
        raise ConfigParseError("compare needs --config")
    base = load_train_config(args.config)
    models = _name_list(args.models)
    augmentations = _name_list(args.augmentations) if args.augmentations else [base.augmentation]
    seeds = _int_list(args.seeds, "seeds") if args.seeds else [base.seed]
    if not models or not seeds:
        raise ConfigParseError("compare needs at least one model and one seed")
    for augmentation in augmentations:
        if augmentation not in ("none", "rotation", "translation"):
            raise ConfigParseError(f"unknown augmentation {augmentation!r}", key="augmentation")

    result = compare(
        base,
        models,
        augmentations,
        seeds,
        data_dir=Path(args.data) if args.data else None,
        workers=args.workers or get_settings().workers,
    )
    out = _out_dir(args.out, Path("."))
    write_compare(out / "compare.csv", augmentations, result.rows)
    write_runs(out / "runs.csv", result.runs)
    outputs = ["compare.csv", "runs.csv"]
    if base.backbone == "deep":
        write_depth(out / "depth.csv", depth_table(result.rows, augmentations[0]))
        outputs.append("depth.csv")
    _finish(out, "compare", outputs, started, base.seed, base)
    return EXIT_OK
