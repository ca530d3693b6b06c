"""Counter-based random streams keyed by (seed, stream id).

Philox is counter-based, so streams with distinct keys are independent and a
run decomposed across workers reproduces the single-worker results exactly:
each work item owns its stream id and never shares generator state.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream_id)."""
    if not (0 <= seed < 2 ** 64) or not (0 <= stream_id < 2 ** 64):
        raise ValueError("seed and stream_id must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | stream_id))
