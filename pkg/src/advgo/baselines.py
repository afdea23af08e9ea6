"""Hard-coded baseline attack policies: Edge, Spiral and Mirror.

Edge plays uniformly random legal moves on the outermost ring (by Chebyshev
distance from the board center) that still has a legal move. Spiral walks a
fixed counterclockwise traversal of the rings from the outside in, skipping
vertices it cannot play and never revisiting one. Mirror echoes the
opponent's last move reflected about the main diagonal, falling back to the
anti-diagonal reflection for moves on the diagonal itself and to the nearest
legal vertex by Manhattan distance when the target is taken.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .board import PASS, GameState, vertex_rc


def _ring_distance(v: int, size: int) -> float:
    r, c = vertex_rc(v, size)
    center = (size - 1) / 2.0
    return max(abs(r - center), abs(c - center))


def edge_move(state: GameState, rng: np.random.Generator) -> int:
    """Uniform random legal move on the outermost ring that has one."""
    size = state.size
    legal = [v for v in state.legal_moves() if v != PASS]
    if not legal:
        return PASS
    outer = max(_ring_distance(v, size) for v in legal)
    ring = [v for v in legal if _ring_distance(v, size) == outer]
    return int(ring[rng.integers(len(ring))])


@lru_cache(maxsize=None)
def spiral_order(size: int) -> tuple[int, ...]:
    """Counterclockwise ring traversal, outermost ring first, starting at
    each ring's bottom-left corner."""
    order = []
    for k in range((size + 1) // 2):
        lo, hi = k, size - 1 - k
        if lo == hi:
            order.append(lo * size + lo)
            continue
        ring = []
        ring += [(hi, c) for c in range(lo, hi + 1)]        # bottom, left->right
        ring += [(r, hi) for r in range(hi - 1, lo - 1, -1)]  # right side, up
        ring += [(lo, c) for c in range(hi - 1, lo - 1, -1)]  # top, right->left
        ring += [(r, lo) for r in range(lo + 1, hi)]          # left side, down
        order += [r * size + c for r, c in ring]
    return tuple(order)


class SpiralCursor:
    """Per-game traversal state; vertices are never revisited."""

    def __init__(self, size: int):
        self.order = spiral_order(size)
        self.pos = 0

    def next_move(self, state: GameState) -> int:
        while self.pos < len(self.order):
            v = self.order[self.pos]
            self.pos += 1
            if state.is_legal(v):
                return v
        return PASS


def mirror_move(state: GameState) -> int:
    """Reflect the opponent's last move; see the module docstring."""
    size = state.size
    last = state.last_move()
    center = ((size // 2) * size + size // 2)
    if last is None:
        target = center
    elif last[1] == PASS:
        return PASS
    else:
        r, c = vertex_rc(last[1], size)
        if r == c:
            target = (size - 1 - c) * size + (size - 1 - r)
        else:
            target = c * size + r
    if state.is_legal(target):
        return target
    tr, tc = vertex_rc(target, size)
    best = None
    best_key = None
    for v in state.legal_moves():
        if v == PASS:
            continue
        r, c = vertex_rc(v, size)
        key = (abs(r - tr) + abs(c - tc), r, c)
        if best_key is None or key < best_key:
            best, best_key = v, key
    return PASS if best is None else best
