"""Reproducible random streams.

Every stochastic operation takes an explicit ``numpy.random.Generator``.
Streams are derived from a base seed plus a path of string/int keys so that
independent consumers never share state:

>>> a = stream(0, "layer", 1, "rf")
>>> b = stream(0, "layer", 1, "rf")
>>> float(a.random()) == float(b.random())
True
"""

import zlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def stream(seed, *keys):
    """Return a Philox-backed generator for ``(seed, *keys)``."""
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
