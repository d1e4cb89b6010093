"""Counter-based random streams keyed by ``(master_seed, stream_id)``.

Each replication gets its own Philox generator whose 128-bit key is the
pair of 64-bit words, so streams are independent without any coordination
between workers and a replication reproduces no matter which thread runs it.
"""

from __future__ import annotations

import numpy as np

_U64 = 1 << 64


def make_stream(master_seed: int, stream_id: int) -> np.random.Generator:
    if not 0 <= master_seed < _U64:
        raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {master_seed!r}")
    if not 0 <= stream_id < _U64:
        raise ValueError(f"stream_id must be a nonnegative 64-bit integer, got {stream_id!r}")
    key = np.array([master_seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
