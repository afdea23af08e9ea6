"""The eight board symmetries (4 rotations x optional transpose).

Transform index k in 0..7: low two bits select the rotation count, bit 2
selects a leading transpose. Vertex, grid and policy transforms all share the
same index maps, so they commute by construction.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .board import PASS

SYMMETRY_COUNT = 8


def transform_rc(r: int, c: int, size: int, k: int) -> tuple[int, int]:
    if k & 4:
        r, c = c, r
    for _ in range(k & 3):
        r, c = size - 1 - c, r  # 90 degree rotation
    return r, c


@lru_cache(maxsize=None)
def vertex_map(size: int, k: int) -> tuple[int, ...]:
    """new_index = vertex_map(size,k)[old_index]."""
    out = [0] * (size * size)
    for r in range(size):
        for c in range(size):
            nr, nc = transform_rc(r, c, size, k)
            out[r * size + c] = nr * size + nc
    return tuple(out)


@lru_cache(maxsize=None)
def inverse_transform(k: int) -> int:
    # The group is tiny; find the inverse by search on a sample board.
    m = vertex_map(5, k)
    for j in range(SYMMETRY_COUNT):
        mj = vertex_map(5, j)
        if all(mj[m[i]] == i for i in range(25)):
            return j
    raise AssertionError("unreachable")


def transform_vertex(v: int, size: int, k: int) -> int:
    if v == PASS:
        return PASS
    return vertex_map(size, k)[v]


def transform_grid(grid: bytes, size: int, k: int) -> bytes:
    m = vertex_map(size, k)
    out = bytearray(size * size)
    for i, cell in enumerate(grid):
        out[m[i]] = cell
    return bytes(out)


def symmetries(grid: bytes, size: int) -> list[bytes]:
    """All 8 transformed grids, identity first."""
    return [transform_grid(grid, size, k) for k in range(SYMMETRY_COUNT)]


def transform_policy(policy: np.ndarray, size: int, k: int) -> np.ndarray:
    """Permute a move distribution (length size*size + 1, pass slot last)."""
    m = vertex_map(size, k)
    out = np.empty_like(policy)
    out[list(m)] = policy[: size * size]
    out[size * size] = policy[size * size]
    return out


def transform_planes(planes: np.ndarray, size: int, k: int) -> np.ndarray:
    """Apply a transform to the spatial dims of a (C, size, size) array."""
    m = np.asarray(vertex_map(size, k))
    flat = planes.reshape(planes.shape[0], size * size)
    out = np.empty_like(flat)
    out[:, m] = flat
    return out.reshape(planes.shape)
