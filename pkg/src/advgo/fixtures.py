"""Adversarial board-state fixtures and their scripted agents.

The "columns" family puts Black's stones in disconnected full-height columns
facing a single huge White block whose only eyespace is too small to live.
Black wins by connecting the columns one gap at a time (answering White
immediately whenever White plays into a gap), then squeezing the White
block's liberties and capturing it. The positions are stored as SGF files of
plain alternating moves so they replay through the ordinary rules engine.

`ConnectorAgent` scripts exactly that strategy; `GapFillAgent` is the
natural challenger that keeps playing into gaps between enemy groups.
"""

from __future__ import annotations

from importlib import resources

from .board import (BLACK, EMPTY, PASS, WHITE, GameState, Rules,
                    neighbor_table, new_game)
from .agents import Agent, _one_hot

FIXTURE_NAMES = ("columns7", "columns9", "columns19")


class FixtureError(KeyError):
    pass


def columns_layout(size: int) -> tuple[list[int], list[int]]:
    """(black_stones, white_stones) of the columns position for a board."""
    if size < 7 or size % 2 == 0:
        raise ValueError("columns fixtures need an odd board size >= 7")
    # Black occupies even columns up to size-4, leaving a buffer column and
    # a 3-wide (or wider) white block on the right.
    black_cols = list(range(0, size - 4, 2))
    buffer_col = black_cols[-1] + 1
    white_cols = list(range(buffer_col + 1, size))
    mid = size // 2
    eyespace = {(mid, size - 2), (mid, size - 1)}
    black = [r * size + c for c in black_cols for r in range(size)]
    white = [r * size + c for c in white_cols for r in range(size)
             if (r, c) not in eyespace]
    return black, white


def position_from_stones(rules: Rules, black: list[int], white: list[int],
                         to_move: int = BLACK) -> GameState:
    """Reach a whole-board position through legal alternating play.

    Greedy ordering: each ply places any not-yet-placed stone of the side to
    move that captures nothing (preferring the most open cell); a side with
    no stones left passes. Raises if the position cannot be sequenced.
    """
    state = new_game(rules)
    remaining = {BLACK: set(black), WHITE: set(white)}
    while remaining[BLACK] or remaining[WHITE]:
        side = state.to_move
        placed = False
        neigh = neighbor_table(state.size)
        candidates = sorted(
            (v for v in remaining[side] if state.is_legal(v)),
            key=lambda v: -sum(1 for n in neigh[v] if state.grid[n] == EMPTY))
        for v in candidates:
            nxt = state.play(v)
            # Reject orderings that capture or self-capture placed stones.
            if sum(1 for c in nxt.grid if c != EMPTY) == \
                    sum(1 for c in state.grid if c != EMPTY) + 1:
                state = nxt
                remaining[side].discard(v)
                placed = True
                break
        if not placed:
            if not remaining[side] or remaining[BLACK + WHITE - side]:
                if state.consecutive_passes >= 1:
                    raise ValueError("cannot sequence position: double pass")
                state = state.play(PASS)
            else:
                raise ValueError("cannot sequence position: stuck")
    if state.to_move != to_move:
        if state.consecutive_passes >= 1:
            raise ValueError("cannot sequence position: parity needs a pass "
                             "after a pass")
        state = state.play(PASS)
    return state


def build_fixture(name: str) -> GameState:
    """Construct a fixture position directly from its generator."""
    if name not in FIXTURE_NAMES:
        raise FixtureError(f"unknown fixture {name!r}; have {FIXTURE_NAMES}")
    size = int(name.removeprefix("columns"))
    black, white = columns_layout(size)
    rules = Rules(board_size=size, komi=7.5)
    return position_from_stones(rules, black, white, BLACK)


def load_fixture(name: str) -> GameState:
    """Load a fixture from its in-repo SGF transcription."""
    if name not in FIXTURE_NAMES:
        raise FixtureError(f"unknown fixture {name!r}; have {FIXTURE_NAMES}")
    from .sgf import from_sgf
    text = resources.files("advgo").joinpath(
        f"fixtures_data/{name}.sgf").read_text()
    return from_sgf(text)


def _liberty_probe(state: GameState, v: int) -> tuple[int, int]:
    """(own-chain liberties, opponent stones captured) after playing v."""
    opp = BLACK + WHITE - state.to_move
    before = sum(1 for c in state.grid if c == opp)
    nxt = state.play(v)
    after = sum(1 for c in nxt.grid if c == opp)
    if nxt.grid[v] != state.to_move:  # the stone suicided away
        return 0, before - after
    ids, chains = nxt.chains()
    return len(chains[ids[v]].liberties), before - after


class ConnectorAgent(Agent):
    """Scripted Black strategy for the columns fixtures.

    Priorities per turn: reconnect through the gap the opponent just played
    into; otherwise connect any two of its disconnected groups; otherwise
    capture an enemy chain in atari; otherwise squeeze the largest enemy
    chain's liberties; otherwise play any safe move; otherwise pass.
    """

    name = "connector"

    def move_distribution(self, state, rng):
        return _one_hot(self._choose(state), state.size), {}

    def _choose(self, state: GameState) -> int:
        size = state.size
        me = state.to_move
        opp = BLACK + WHITE - me
        neigh = neighbor_table(size)
        ids, chains = state.chains()
        my_ids = [i for i, ch in enumerate(chains) if ch.color == me]

        if len(my_ids) > 1:
            touching_at = {}
            for v in range(size * size):
                if state.grid[v] != EMPTY or not state.is_legal(v):
                    continue
                touching = {ids[n] for n in neigh[v]
                            if state.grid[n] == me}
                if len(touching) >= 2:
                    touching_at[v] = touching
            if touching_at:
                last = state.last_move()
                if last is not None and last[1] != PASS and last[0] == opp:
                    # reconnect exactly the groups the intruder sits between
                    split = {ids[n] for n in neigh[last[1]]
                             if state.grid[n] == me}
                    if len(split) >= 2:
                        near = [v for v, t in touching_at.items()
                                if split <= t]
                        if near:
                            return self._safest(state, near)
                return self._safest(state, sorted(touching_at))

        # Capture any enemy chain in atari (largest first).
        atari = [ch for ch in chains
                 if ch.color == opp and len(ch.liberties) == 1]
        for ch in sorted(atari, key=lambda c: -len(c.stones)):
            lib = next(iter(ch.liberties))
            if state.is_legal(lib):
                return lib

        # Squeeze the largest enemy chain.
        enemies = sorted((ch for ch in chains if ch.color == opp),
                         key=lambda c: -len(c.stones))
        for target in enemies:
            libs = sorted(v for v in target.liberties if state.is_legal(v))
            safe = [v for v in libs if _liberty_probe(state, v)[0] >= 2
                    or _liberty_probe(state, v)[1] > 0]
            if safe:
                return safe[0]
            # Accept a one-liberty squeeze when the chain is nearly dead.
            if libs and len(target.liberties) <= 2:
                return libs[0]

        # Any safe filler move that is not one of our own eye points.
        for v in range(size * size):
            if state.grid[v] != EMPTY or not state.is_legal(v):
                continue
            if all(state.grid[n] == me for n in neigh[v]):
                continue  # own eye, keep it
            if _liberty_probe(state, v)[0] >= 2:
                return v
        return PASS

    def _safest(self, state: GameState, candidates: list[int]) -> int:
        best, best_libs = candidates[0], -1
        for v in candidates:
            libs, _ = _liberty_probe(state, v)
            if libs > best_libs:
                best, best_libs = v, libs
        return best


class GapFillAgent(Agent):
    """Challenger that plays into a gap between enemy groups every turn."""

    name = "gapfill"

    def move_distribution(self, state, rng):
        size = state.size
        opp = BLACK + WHITE - state.to_move
        neigh = neighbor_table(size)
        ids, chains = state.chains()
        for v in range(size * size):
            if state.grid[v] != EMPTY or not state.is_legal(v):
                continue
            touching = {ids[n] for n in neigh[v] if state.grid[n] == opp}
            if len(touching) >= 2:
                return _one_hot(v, size), {}
        return _one_hot(PASS, size), {}
