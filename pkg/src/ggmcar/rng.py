"""Reproducible random number streams.

One counter-based generator family (Philox4x64) keyed by (seed, chain_index);
``stream`` jumps to an independent substream of the same key, used to keep
prior-constant estimation separate from the chain's own draws.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "Philox4x64"


def chain_rng(seed: int, chain_index: int = 0, stream: int = 0) -> np.random.Generator:
    key = np.array([seed, chain_index], dtype=np.uint64)
    bg = np.random.Philox(key=key)
    if stream:
        bg = bg.jumped(stream)
    return np.random.Generator(bg)
