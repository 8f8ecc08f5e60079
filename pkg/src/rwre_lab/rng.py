"""Counter-based random streams.

All randomness in the library flows through Philox, a counter-based 64-bit
generator.  A stream is addressed by (master seed, stream id); replica r of a
Monte Carlo run draws from stream (seed, r).  Streams with distinct ids are
independent and bit-reproducible regardless of scheduling, so parallel runs
reduce to the same bytes as serial ones.
"""

from __future__ import annotations

import numpy as np

# Fixed stream-id namespaces, so unrelated subsystems never collide even when
# handed the same master seed.
ENV_STREAM = np.uint64(0x0E5A_0000_0000_0000)
WALK_STREAM = np.uint64(0x3A1C_0000_0000_0000)
BOOT_STREAM = np.uint64(0xB007_0000_0000_0000)


def stream(seed: int, stream_id: int = 0, namespace: np.uint64 = ENV_STREAM) -> np.random.Generator:
    """Return the Generator for stream ``stream_id`` under ``seed``."""
    key = np.array([np.uint64(seed), namespace + np.uint64(stream_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def walk_stream(seed: int, replica: int) -> np.random.Generator:
    """Per-replica walk stream: replica index is the counter key."""
    return stream(seed, replica, namespace=WALK_STREAM)
