"""Pass-alive analysis and the pass-hardening move filter.

A chain is pass-alive (unconditionally alive) when no sequence of opponent
moves can capture it even if its owner only passes. Benson's fixed-point
elimination computes the exact set: a chain survives while it has at least
two *vital* regions, where a region (maximal connected set of non-own-color
points) is vital to a chain if every empty point of the region is a liberty
of that chain. Pass-alive territory is the union of regions bordered only by
pass-alive chains with all-or-all-but-one of their points adjacent to such a
chain.

The pass-hardening defense zeroes the Pass probability of a move
distribution whenever a legal move outside the mover's own pass-alive
territory exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .board import EMPTY, BLACK, WHITE, GameState, board_chains, neighbor_table


@dataclass
class _Region:
    cells: list[int]
    empties: list[int]
    border_chains: set[int]  # ids of own-color chains adjacent to the region


def _color_regions(grid: bytes, size: int, color: int):
    """Maximal connected regions of non-`color` points."""
    neigh = neighbor_table(size)
    seen = bytearray(size * size)
    regions: list[_Region] = []
    ids, chains = board_chains(grid, size)
    for start, cell in enumerate(grid):
        if cell == color or seen[start]:
            continue
        seen[start] = 1
        cells = [start]
        empties = [start] if cell == EMPTY else []
        border: set[int] = set()
        stack = [start]
        while stack:
            cur = stack.pop()
            for n in neigh[cur]:
                v = grid[n]
                if v == color:
                    border.add(ids[n])
                elif not seen[n]:
                    seen[n] = 1
                    cells.append(n)
                    if v == EMPTY:
                        empties.append(n)
                    stack.append(n)
        regions.append(_Region(cells, empties, border))
    return ids, chains, regions


def pass_alive_chains(grid: bytes, size: int, color: int,
                      _order=None) -> list[frozenset[int]]:
    """Chains of `color` that cannot be captured against a passing defender.

    `_order` optionally fixes the chain elimination order; the fixed point is
    order-independent, the knob exists so tests can verify exactly that.
    """
    ids, chains, regions = _color_regions(grid, size, color)
    own = [i for i, ch in enumerate(chains) if ch.color == color]
    if not own:
        return []

    # A region is vital to a bordering chain when all its empty points are
    # liberties of that chain. Vitality is static under elimination.
    vital_regions: dict[int, set[int]] = {cid: set() for cid in own}
    for rid, region in enumerate(regions):
        for cid in region.border_chains:
            libs = chains[cid].liberties
            if all(e in libs for e in region.empties):
                vital_regions[cid].add(rid)

    alive = set(own)
    live_regions = set(range(len(regions)))
    changed = True
    while changed:
        changed = False
        order = list(alive) if _order is None else [c for c in _order if c in alive]
        for cid in order:
            if len(vital_regions[cid] & live_regions) < 2:
                alive.discard(cid)
                changed = True
        dead_regions = [rid for rid in live_regions
                        if not regions[rid].border_chains <= alive]
        if dead_regions:
            live_regions.difference_update(dead_regions)
            changed = True
    return [frozenset(chains[cid].stones) for cid in sorted(alive)]


def pass_alive_territory(grid: bytes, size: int, color: int,
                         groups: list[frozenset[int]] | None = None) -> frozenset[int]:
    """Union of regions that are pass-alive territory for `color`."""
    if groups is None:
        groups = pass_alive_chains(grid, size, color)
    alive_cells = set()
    for g in groups:
        alive_cells |= g
    ids, chains, regions = _color_regions(grid, size, color)
    alive_ids = {ids[next(iter(g))] for g in groups}
    neigh = neighbor_table(size)
    territory: set[int] = set()
    for region in regions:
        if not region.border_chains:
            continue
        if not region.border_chains <= alive_ids:
            continue
        adjacent = sum(
            1 for cell in region.cells
            if any(n in alive_cells for n in neigh[cell]))
        if adjacent >= len(region.cells) - 1:
            territory.update(region.cells)
    return frozenset(territory)


@dataclass
class RegionAnalysis:
    """Full pass-alive picture of a grid, per color."""

    chains: dict[int, list[frozenset[int]]] = field(default_factory=dict)
    pass_alive: dict[int, list[frozenset[int]]] = field(default_factory=dict)
    territory: dict[int, frozenset[int]] = field(default_factory=dict)


def analyze(grid: bytes, size: int) -> RegionAnalysis:
    out = RegionAnalysis()
    _, chains = board_chains(grid, size)
    for color in (BLACK, WHITE):
        out.chains[color] = [frozenset(ch.stones) for ch in chains
                             if ch.color == color]
        groups = pass_alive_chains(grid, size, color)
        out.pass_alive[color] = groups
        out.territory[color] = pass_alive_territory(grid, size, color, groups)
    return out


def pass_hardened_filter(state: GameState, policy: np.ndarray) -> np.ndarray:
    """Zero the Pass slot of a move distribution unless every legal move
    lies inside the mover's own pass-alive territory.

    `policy` has length size*size + 1 with the pass slot last. Relative
    probabilities among non-pass moves are never changed; if the filtered
    distribution has no mass left, it falls back to uniform over the legal
    non-pass moves.
    """
    size = state.size
    pass_idx = size * size
    placements = [v for v in state.legal_moves() if v >= 0]
    territory = pass_alive_territory(state.grid, size, state.to_move)
    outside = [v for v in placements if v not in territory]
    if not outside:
        return policy
    out = policy.astype(np.float64).copy()
    out[pass_idx] = 0.0
    total = out.sum()
    if total <= 0.0:
        out[:] = 0.0
        out[placements] = 1.0 / len(placements)
        return out
    return out / total
