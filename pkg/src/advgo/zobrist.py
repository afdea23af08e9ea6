"""Fixed Zobrist key tables for incremental whole-board hashing.

Keys are derived from a hard-coded seed so hashes are stable across runs,
processes and machines. Empty cells carry keys too: the empty board hashes to
a nonzero, size-specific constant, and placing or removing a stone is always
a pair of XORs (cell's old key out, new key in).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Changing this constant invalidates every recorded hash; never bump casually.
_TABLE_SEED = 0x9E3779B97F4A7C15


@lru_cache(maxsize=None)
def hash_tables(size: int) -> tuple[tuple[int, ...], ...]:
    """Return 64-bit key tables indexed as [cell_value][cell_index].

    Cell values are 0 (empty), 1 (black), 2 (white); cell indices are
    row-major over a size x size board.
    """
    ss = np.random.SeedSequence(entropy=_TABLE_SEED, spawn_key=(size,))
    gen = np.random.Generator(np.random.PCG64(ss))
    vals = gen.integers(0, 2**64, size=(3, size * size), dtype=np.uint64)
    return tuple(tuple(int(v) for v in row) for row in vals)


@lru_cache(maxsize=None)
def empty_board_hash(size: int) -> int:
    h = 0
    for key in hash_tables(size)[0]:
        h ^= key
    return h


def full_hash(grid: bytes, size: int) -> int:
    """Recompute the hash of a grid from scratch (the incremental oracle)."""
    tables = hash_tables(size)
    h = 0
    for i, cell in enumerate(grid):
        h ^= tables[cell][i]
    return h
