"""Counter-based random streams, one per (master_seed, path_index).

Each stream is Philox4x64-10 keyed by ``(master_seed, path_index)``; draw
``k`` is word ``k % 4`` of the block with counter ``k // 4``.  Raw words
map to the open interval (0, 1) as ``((x >> 12) + 0.5) * 2**-52``.  The
compiled kernels implement the same mapping, so a path is reproducible from
its seed and index alone, independently of scheduling.
"""
from __future__ import annotations

import numpy as np

__all__ = ["RngStream", "raw_to_uniform", "UINT64_MASK"]

UINT64_MASK = (1 << 64) - 1
_COUNTER_BEFORE_ZERO = (1 << 256) - 1  # numpy bumps the counter before each block
_INV_2_52 = 2.0 ** -52


def raw_to_uniform(x: int) -> float:
    return ((x >> 12) + 0.5) * _INV_2_52


class RngStream:
    """Sequential uniform draws for one path.

    Parameters
    ----------
    master_seed : int
        Run-wide 64-bit seed.
    path_index : int
        Non-negative stream id; distinct ids select distinct Philox keys.
    """

    __slots__ = ("master_seed", "path_index", "draw_counter", "_bitgen", "_buf", "_pos")

    def __init__(self, master_seed: int, path_index: int):
        if path_index < 0:
            raise ValueError("path_index must be >= 0")
        self.master_seed = int(master_seed) & UINT64_MASK
        self.path_index = int(path_index)
        self.draw_counter = 0
        key = np.array([self.master_seed, self.path_index & UINT64_MASK], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key, counter=_COUNTER_BEFORE_ZERO)
        self._buf: list[int] = []
        self._pos = 0

    def raw(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = [int(v) for v in self._bitgen.random_raw(4)]
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        self.draw_counter += 1
        return x

    def uniform(self) -> float:
        """Next draw in (0, 1)."""
        return raw_to_uniform(self.raw())

    def __repr__(self):
        return (
            f"RngStream(master_seed={self.master_seed}, path_index={self.path_index}, "
            f"draw_counter={self.draw_counter})"
        )
