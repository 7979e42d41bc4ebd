"""stnlab common package"""

from stnlab_common.config import get_settings
from stnlab_common.logging import setup_logging
from stnlab_common.models import (
    AppliedTransform,
    EpochRecord,
    LayerSpec,
    LocHeadSpec,
    NetworkSpec,
    RunManifest,
    TrainConfig,
)

__version__ = "0.1.0"

__all__ = [
    "AppliedTransform",
    "EpochRecord",
    "LayerSpec",
    "LocHeadSpec",
    "NetworkSpec",
    "RunManifest",
    "TrainConfig",
    "get_settings",
    "setup_logging",
]
