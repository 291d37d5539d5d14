"""Counter-based random streams.

Every draw is keyed by (seed, purpose, index) through Philox, so the order in
which branches are evaluated can never perturb the noise another branch sees.
"""

from __future__ import annotations

import numpy as np

# Stream purposes. Keep these stable: they are part of the determinism contract.
INIT_NOISE = 0
ANCESTRAL = 1
WORLD_MEANS = 2
MODEL_INIT = 3
TEST_DATA = 7

_MASK64 = (1 << 64) - 1


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    key = np.array(
        [seed & _MASK64, ((purpose & 0xFFFFFFFF) << 32 | (index & 0xFFFFFFFF)) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def gaussian(shape, seed: int, purpose: int, index: int = 0) -> np.ndarray:
    """Seeded standard-normal tensor, float32."""
    return stream(seed, purpose, index).standard_normal(size=shape, dtype=np.float32)
