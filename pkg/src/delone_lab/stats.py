"""Per-trial seeding and binomial confidence intervals."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

Z95 = 1.959963984540054


def trial_seed(master: int, trial: int) -> int:
    """Stable 64-bit seed for trial ``trial`` of a run seeded with ``master``."""
    digest = hashlib.blake2b(f"{int(master)}:{int(trial)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def trial_rng(master: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(master, trial))


def wilson_interval(successes: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def map_trials(fn, n_trials: int, threads: int = 1):
    """``[fn(i) for i in range(n_trials)]``, optionally on a thread pool; order is preserved."""
    if threads <= 1:
        return [fn(i) for i in range(n_trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_trials)))
