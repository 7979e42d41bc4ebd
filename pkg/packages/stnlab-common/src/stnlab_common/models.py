"""Pydantic models for stnlab"""

import math
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TransformKind = Literal["none", "rotation", "translation"]
LayerKind = Literal["conv", "pool", "relu", "dense", "softmax"]
Variant = Literal["plain", "stn_c0", "stn_cX", "stn_slX"]
LocMode = Literal["full_affine", "rotation_only"]


class AppliedTransform(BaseModel):
    """Ground-truth transformation applied to one dataset example"""

    model_config = ConfigDict(frozen=True)

    kind: TransformKind = Field("none", description="Which family the example was warped with")
    angle: float = Field(0.0, description="Rotation in radians, in (-pi, pi]")
    shift: Tuple[int, int] = Field((0, 0), description="(dy, dx) content shift in pixels")

    @field_validator("angle")
    @classmethod
    def angle_in_range(cls, value: float) -> float:
        if not (-math.pi < value <= math.pi):
            raise ValueError(f"angle {value} outside (-pi, pi]")
        return value


class LayerSpec(BaseModel):
    """One backbone layer descriptor"""

    model_config = ConfigDict(frozen=True)

    kind: LayerKind
    width: Optional[int] = Field(None, ge=1, description="conv output channels / dense units")
    kernel: int = Field(3, ge=1)
    stride: int = Field(1, ge=1)
    padding: int = Field(0, ge=0)
    window: int = Field(2, ge=1, description="pool window (stride defaults to the window)")

    @model_validator(mode="after")
    def width_required(self) -> "LayerSpec":
        if self.kind in ("conv", "dense") and self.width is None:
            raise ValueError(f"{self.kind} layer needs a width")
        return self

    @classmethod
    def conv(cls, width: int, kernel: int = 3, stride: int = 1, padding: int = 1) -> "LayerSpec":
        return cls(kind="conv", width=width, kernel=kernel, stride=stride, padding=padding)

    @classmethod
    def pool(cls, window: int = 2) -> "LayerSpec":
        return cls(kind="pool", window=window, stride=window)

    @classmethod
    def relu(cls) -> "LayerSpec":
        return cls(kind="relu")

    @classmethod
    def dense(cls, width: int) -> "LayerSpec":
        return cls(kind="dense", width=width)


class LocHeadSpec(BaseModel):
    """Localization network descriptor"""

    model_config = ConfigDict(frozen=True)

    mode: LocMode = "full_affine"
    hidden: List[int] = Field(default_factory=lambda: [32])
    conv_channels: List[int] = Field(
        default_factory=lambda: [16, 16],
        description="Private conv blocks of a separate localization net (stn_c0 / stn_cX)",
    )


class NetworkSpec(BaseModel):
    """Declarative description of one of the four network configurations"""

    model_config = ConfigDict(frozen=True)

    input_shape: Tuple[int, int, int] = (1, 42, 42)
    num_classes: int = Field(10, ge=1)
    backbone: List[LayerSpec]
    variant: Variant = "plain"
    depth: int = Field(0, ge=0, description="ST insertion / sharing depth X in conv blocks")
    loc_head: LocHeadSpec = Field(default_factory=LocHeadSpec)

    @property
    def name(self) -> str:
        if self.variant == "plain":
            return "cnn"
        if self.variant == "stn_c0":
            return "stn_c0"
        prefix = "stn_c" if self.variant == "stn_cX" else "stn_sl"
        return f"{prefix}{self.depth}"

    def conv_count(self) -> int:
        return sum(1 for layer in self.backbone if layer.kind == "conv")


class TrainConfig(BaseModel):
    """Everything a training run depends on"""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(..., ge=0)
    model: str = Field(..., description="cnn | stn_c0 | stn_cX | stn_slX")
    epochs: int = Field(..., ge=0)
    batch_size: int = Field(..., ge=1)
    learning_rate: float = Field(..., gt=0)
    optimizer: Literal["adam", "sgd_momentum"]
    dataset: Literal["mnist", "glyphs"]
    augmentation: TransformKind
    augmentation_range: Optional[float] = Field(None, ge=0)
    backbone: Literal["default", "deep"] = "default"
    loc_mode: LocMode = "full_affine"
    canvas: int = Field(42, ge=16)
    train_limit: int = Field(10000, ge=1)
    test_limit: int = Field(2000, ge=1)
    momentum: float = Field(0.9, ge=0, lt=1)

    def resolved_range(self) -> float:
        """Augmentation range with the declared per-kind default"""
        if self.augmentation_range is not None:
            return self.augmentation_range
        if self.augmentation == "rotation":
            return math.pi / 2
        if self.augmentation == "translation":
            return 8.0
        return 0.0


class EpochRecord(BaseModel):
    """Per-epoch training history entry"""

    epoch: int
    loss: float
    accuracy: float


class RunManifest(BaseModel):
    """Self-description of one CLI run"""

    command: str
    code_version: str
    seed: Optional[int] = None
    config: Dict[str, str] = Field(default_factory=dict)
    spec_json: Optional[str] = None
    outputs: Dict[str, str] = Field(default_factory=dict, description="file name -> sha256")
    wall_clock_seconds: float = 0.0
