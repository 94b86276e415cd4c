"""Deterministic seed derivation for independent RNG streams."""

import numpy as np


def derive_seed(master: int, *key: int) -> int:
    """Stable 32-bit seed for a (master, key...) stream.

    Episode and phase streams are derived this way so outputs do not
    depend on scheduling or worker count.
    """
    ss = np.random.SeedSequence([int(master), *[int(k) for k in key]])
    return int(ss.generate_state(1)[0])


def derive_rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *key))
