"""Deterministic per-job seeds.

``derive_seed(master, *keys)`` feeds the master seed and the job keys (ints or
strings) to :class:`numpy.random.SeedSequence` and returns its first 32-bit
word.  Jobs therefore get independent streams whatever order or process they
run in.
"""

import zlib

import numpy as np


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(master: int, *keys) -> int:
    entropy = [int(master) & 0xFFFFFFFF] + [_key_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
