import os

import numpy as np

SEED_ENV = "BEANSCOPE_SEED"


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for the sub-task addressed by ``keys``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys) if keys else int(seed))


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    if value is None or not value.strip():
        return fallback
    return int(value)
