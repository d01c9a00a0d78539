"""
Named random streams.

All randomness in a run derives from one integer seed. Each stage draws from
its own stream, keyed by name, so enabling or resizing one stage never shifts
the draws of another.
"""
import zlib
from typing import Union

import numpy as np

StreamKey = Union[str, int]


def _key(part: StreamKey) -> int:
    if isinstance(part, int):
        return part
    return zlib.crc32(str(part).encode('utf-8'))


def stream(seed: int, *names: StreamKey) -> np.random.Generator:
    """
    Return the generator for a named stream.

    Args:
        seed: Run seed
        names: Stream path, e.g. ``stream(seed, 'tweak', 3)``

    Returns:
        np.random.Generator: Independent, reproducible generator
    """
    entropy = [int(seed)] + [_key(n) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def stream_seed(seed: int, *names: StreamKey) -> int:
    """Derive a 32-bit integer seed for libraries that take ``random_state``."""
    return int(stream(seed, *names).integers(0, 2**31 - 1))
