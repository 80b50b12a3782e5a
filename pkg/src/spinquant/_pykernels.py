"""Pure-Python kernels; the fallback when the compiled extension is missing."""
from __future__ import annotations

import numpy as np

from .engine import PathBatch, _sample_theta_prime, simulate_path
from .rng import RngStream


def simulate_chunk(path_indices, master_seed, config, table) -> PathBatch:
    paths = [simulate_path(config, table, RngStream(master_seed, int(i))) for i in path_indices]
    return PathBatch.from_paths(paths, tau_end=config.tau_end)


def sample_theta_prime_batch(theta_from, tau_f, table, u) -> np.ndarray:
    return np.array(
        [_sample_theta_prime(float(a), float(b), table, float(c)) for a, b, c in zip(theta_from, tau_f, u)]
    )


def philox_raw(master_seed: int, path_index: int, n: int) -> np.ndarray:
    s = RngStream(master_seed, path_index)
    return np.array([s.raw() for _ in range(n)], dtype=np.uint64)
