"""Deterministic counter-based Gaussian noise.

Draws come from numpy's Philox counter-based generator, keyed per
(seed, stream, frame). Each frame of a volume is generated from its own
key, so the result is identical whether frames are filled sequentially
or in parallel, and draws for different purposes (streams) never overlap.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# stream ids for the pipeline's named draw sites
STREAM_SOURCE = 0
STREAM_SNIS_NOISE = 1


def _key(seed: int, stream: int, frame: int) -> list[int]:
    # 128-bit Philox key; stream/frame packed into the second word
    return [seed & _MASK64, ((stream << 32) ^ frame) & _MASK64]


def gaussian(seed: int, stream: int, shape: tuple[int, ...]) -> np.ndarray:
    """Standard-normal draw of `shape`, frame axis first, per-frame keyed."""
    out = np.empty(shape, dtype=np.float64)
    for frame in range(shape[0]):
        gen = np.random.Generator(np.random.Philox(key=_key(seed, stream, frame)))
        out[frame] = gen.standard_normal(shape[1:])
    return out
