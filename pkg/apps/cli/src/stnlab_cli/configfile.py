"""Plain-text key=value run configuration"""

from pathlib import Path
from typing import Dict, Tuple, Union

from pydantic import ValidationError

from stnlab_common.errors import ConfigParseError
from stnlab_common.models import TrainConfig


def parse_config_text(text: str) -> Dict[str, Tuple[str, int]]:
    """key -> (value, line number); '#' starts a comment, blank lines are skipped"""
    entries: Dict[str, Tuple[str, int]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected key=value, got {raw.strip()!r}", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigParseError("empty key", line=number)
        if key in entries:
            raise ConfigParseError(
                f"duplicate key {key!r} (first set on line {entries[key][1]})", line=number, key=key
            )
        entries[key] = (value, number)
    return entries


def train_config_from_text(text: str) -> TrainConfig:
    entries = parse_config_text(text)
    known = TrainConfig.model_fields
    for key, (_, number) in entries.items():
        if key not in known:
            raise ConfigParseError(f"unknown key {key!r}", line=number, key=key)
    values = {key: value for key, (value, _) in entries.items()}
    if values.get("augmentation_range", None) == "":
        values.pop("augmentation_range")
    try:
        return TrainConfig.model_validate(values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        if error["type"] == "missing":
            raise ConfigParseError(f"missing required key {key!r}", key=key) from exc
        line = entries[key][1] if key in entries else None
        raise ConfigParseError(f"{key}: {error['msg']}", line=line, key=key) from exc


def load_train_config(path: Union[str, Path]) -> TrainConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    return train_config_from_text(text)


def format_config(cfg: TrainConfig) -> str:
    """Canonical key=value rendering, sorted by key; unset values are left empty"""
    lines = []
    for key, value in sorted(cfg.model_dump().items()):
        lines.append(f"{key}={'' if value is None else value}")
    return "\n".join(lines) + "\n"
