"""Self-describing checkpoint container.

Layout (integers little-endian):

    b"STNLABCK"  u32 version  u32 spec_len  spec JSON (UTF-8)
    u32 param_count
    per parameter: u16 name_len  name (UTF-8)  u8 ndim  u32 dims[ndim]  float64 payload
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from stnlab_common.errors import (
    CheckpointVersionError,
    CorruptCheckpointError,
    RejectedSpecError,
    UnknownLayerError,
)
from stnlab_common.models import NetworkSpec
from stnlab_core.networks import ModelInstance, build

logger = logging.getLogger(__name__)

MAGIC = b"STNLABCK"
VERSION = 1


def encode(model: ModelInstance) -> bytes:
    spec_json = model.spec.model_dump_json().encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(spec_json)), spec_json]
    chunks.append(struct.pack("<I", len(model.params)))
    for name, tensor in model.params.items():
        raw_name = name.encode("utf-8")
        shape = tensor.shape
        chunks.append(struct.pack(f"<H{len(raw_name)}sB{len(shape)}I", len(raw_name), raw_name, len(shape), *shape))
        chunks.append(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    return b"".join(chunks)


def save(model: ModelInstance, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode(model))
    logger.info("Saved checkpoint", extra={"path": str(path), "model": model.spec.name})


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CorruptCheckpointError(
                f"file ends inside {what} at byte {self.offset} ({size} bytes needed)"
            )
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(payload: bytes) -> ModelInstance:
    """Rebuild a model; nothing is returned unless the whole file is valid"""
    reader = _Reader(payload)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CorruptCheckpointError("not a checkpoint (bad magic)")
    version, spec_len = reader.unpack("<II", "header")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, expected {VERSION}")
    try:
        spec = NetworkSpec.model_validate_json(reader.take(spec_len, "spec"))
    except ValidationError as exc:
        raise CorruptCheckpointError(f"spec does not validate: {exc}") from exc

    try:
        model = build(spec, seed=0)
    except RejectedSpecError as exc:
        raise CorruptCheckpointError(f"stored spec is not buildable: {exc}") from exc
    (count,) = reader.unpack("<I", "parameter count")
    loaded = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "name length")
        try:
            name = reader.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptCheckpointError(f"parameter name at byte {reader.offset} is not UTF-8") from exc
        (ndim,) = reader.unpack("<B", f"{name} rank")
        shape = reader.unpack(f"<{ndim}I", f"{name} shape")
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.take(8 * size, f"{name} payload"), dtype="<f8")
        if name not in model.params:
            raise UnknownLayerError(f"parameter {name!r} is not part of a {spec.name} model")
        if tuple(shape) != model.params[name].shape:
            raise CorruptCheckpointError(
                f"{name}: stored shape {tuple(shape)} != expected {model.params[name].shape}"
            )
        loaded[name] = data.astype(np.float64).reshape(shape)
    if reader.offset != len(payload):
        raise CorruptCheckpointError(f"{len(payload) - reader.offset} trailing bytes after parameters")
    missing = [name for name in model.params if name not in loaded]
    if missing:
        raise CorruptCheckpointError(f"missing parameters: {', '.join(missing)}")

    for name, tensor in model.params.items():
        tensor.data = loaded[name]
    return model


def load(path: Union[str, Path]) -> ModelInstance:
    model = decode(Path(path).read_bytes())
    logger.info("Loaded checkpoint", extra={"path": str(path), "model": model.spec.name})
    return model
