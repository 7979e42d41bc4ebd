"""Named random streams derived from a single run seed"""

import zlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 32-bit key for a stream name"""
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``name`` under ``seed``.

    Streams are keyed by name, not by creation order, so introducing a new
    stream leaves every existing one untouched.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name),))
    return np.random.Generator(np.random.PCG64(sequence))
