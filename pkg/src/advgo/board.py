"""Exact Tromp-Taylor Go rules kernel.

Area scoring, positional superko, configurable suicide, game end by two
consecutive passes or a move limit. A :class:`GameState` is an immutable
value: every move produces a fresh state, so states can be shared between
concurrent workers without synchronization.

Vertices are flat row-major cell indices ``r * size + c`` in
``0 .. size*size - 1``; the distinguished value :data:`PASS` (= -1) is the
pass move. Grids are ``bytes`` of cell values (0 empty, 1 black, 2 white).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .zobrist import empty_board_hash, hash_tables

EMPTY, BLACK, WHITE = 0, 1, 2
PASS = -1
DRAW = 0  # Score.winner when points are equal

COLOR_NAMES = {BLACK: "black", WHITE: "white"}


def opponent(color: int) -> int:
    return BLACK + WHITE - color


class IllegalMoveError(Exception):
    """Base class for every way a move can be rejected."""


class OffBoardError(IllegalMoveError):
    pass


class OccupiedVertexError(IllegalMoveError):
    pass


class SuicideError(IllegalMoveError):
    pass


class SuperkoError(IllegalMoveError):
    pass


class GameOverError(IllegalMoveError):
    pass


@lru_cache(maxsize=None)
def neighbor_table(size: int) -> tuple[tuple[int, ...], ...]:
    """Orthogonal neighbours of every cell, as flat indices."""
    out = []
    for r in range(size):
        for c in range(size):
            n = []
            if r > 0:
                n.append((r - 1) * size + c)
            if r < size - 1:
                n.append((r + 1) * size + c)
            if c > 0:
                n.append(r * size + c - 1)
            if c < size - 1:
                n.append(r * size + c + 1)
            out.append(tuple(n))
    return tuple(out)


def vertex(row: int, col: int, size: int) -> int:
    if not (0 <= row < size and 0 <= col < size):
        raise OffBoardError(f"({row},{col}) outside {size}x{size} board")
    return row * size + col


def vertex_rc(v: int, size: int) -> tuple[int, int]:
    return divmod(v, size)


# GTP-style coordinates: column letters skip I, rows count from the bottom.
GTP_COLUMNS = "ABCDEFGHJKLMNOPQRST"


def format_vertex(v: int, size: int) -> str:
    if v == PASS:
        return "pass"
    r, c = vertex_rc(v, size)
    return f"{GTP_COLUMNS[c]}{size - r}"


def parse_vertex(text: str, size: int) -> int:
    t = text.strip().upper()
    if t == "PASS":
        return PASS
    col = GTP_COLUMNS.find(t[0])
    if col < 0 or col >= size:
        raise ValueError(f"bad vertex {text!r}")
    try:
        row_num = int(t[1:])
    except ValueError:
        raise ValueError(f"bad vertex {text!r}") from None
    if not 1 <= row_num <= size:
        raise ValueError(f"bad vertex {text!r}")
    return (size - row_num) * size + col


@dataclass(frozen=True)
class Rules:
    """Game parameters. ``turn_limit`` defaults to 2 * size**2 moves."""

    board_size: int = 9
    komi: float = 7.5
    suicide_allowed: bool = True
    turn_limit: int | None = None

    def __post_init__(self):
        if not 3 <= self.board_size <= 19:
            raise ValueError(f"board size {self.board_size} outside 3..19")
        if (self.komi * 2) % 1 != 0:
            raise ValueError(f"komi {self.komi} is not a multiple of 0.5")
        if self.turn_limit is not None and self.turn_limit <= 0:
            raise ValueError("turn limit must be positive")

    @property
    def max_moves(self) -> int:
        if self.turn_limit is not None:
            return self.turn_limit
        return 2 * self.board_size * self.board_size


@dataclass(frozen=True)
class Score:
    """Tromp-Taylor result. ``white_points`` includes komi."""

    black_points: float
    white_points: float
    winner: int  # BLACK, WHITE or DRAW
    margin: float

    def formatted(self) -> str:
        if self.winner == DRAW:
            return "0"
        name = "B" if self.winner == BLACK else "W"
        return f"{name}+{self.margin:g}"


class _Chain:
    __slots__ = ("color", "stones", "liberties")

    def __init__(self, color: int, stones: list[int], liberties: set[int]):
        self.color = color
        self.stones = stones
        self.liberties = liberties


def board_chains(grid: bytes, size: int) -> tuple[list[int], list[_Chain]]:
    """Label chains on a grid: (cell -> chain id or -1, chains)."""
    neigh = neighbor_table(size)
    ids = [-1] * (size * size)
    chains: list[_Chain] = []
    for start, color in enumerate(grid):
        if color == EMPTY or ids[start] >= 0:
            continue
        cid = len(chains)
        stones = [start]
        liberties: set[int] = set()
        ids[start] = cid
        stack = [start]
        while stack:
            cell = stack.pop()
            for n in neigh[cell]:
                v = grid[n]
                if v == EMPTY:
                    liberties.add(n)
                elif v == color and ids[n] < 0:
                    ids[n] = cid
                    stones.append(n)
                    stack.append(n)
        chains.append(_Chain(color, stones, liberties))
    return ids, chains


class GameState:
    """An immutable Go position plus the history needed for superko.

    Use :func:`new_game` to create one and :meth:`play` to advance it.
    """

    __slots__ = (
        "rules",
        "size",
        "grid",
        "to_move",
        "consecutive_passes",
        "move_history",
        "hash",
        "_positions",
        "_chains_cache",
        "_legal_cache",
    )

    def __init__(self, rules, size, grid, to_move, consecutive_passes,
                 move_history, hash_, positions):
        self.rules = rules
        self.size = size
        self.grid = grid
        self.to_move = to_move
        self.consecutive_passes = consecutive_passes
        self.move_history = move_history
        self.hash = hash_
        self._positions = positions
        self._chains_cache = None
        self._legal_cache = None

    # -- structure ---------------------------------------------------------

    @property
    def position_hashes(self):
        """All whole-board hashes seen after completed moves (incl. start)."""
        return self._positions.keys()

    def chains(self) -> tuple[list[int], list[_Chain]]:
        if self._chains_cache is None:
            self._chains_cache = board_chains(self.grid, self.size)
        return self._chains_cache

    def is_terminal(self) -> bool:
        return (self.consecutive_passes >= 2
                or len(self.move_history) >= self.rules.max_moves)

    # -- move resolution ---------------------------------------------------

    def _resolve(self, v: int):
        """Simulate placing a stone for the side to move.

        Returns (new_grid, new_hash, captured_cells, removed_own_cells) or
        raises SuicideError when suicide is disabled. Does not check superko.
        """
        color = self.to_move
        opp = opponent(color)
        size = self.size
        grid = self.grid
        neigh = neighbor_table(size)
        ids, chains = self.chains()
        tables = hash_tables(size)

        cap_ids = set()
        has_liberty = False
        friendly_ids = set()
        for n in neigh[v]:
            cell = grid[n]
            if cell == EMPTY:
                has_liberty = True
            elif cell == opp:
                ch = chains[ids[n]]
                if len(ch.liberties) == 1:  # v is its last liberty
                    cap_ids.add(ids[n])
            else:
                friendly_ids.add(ids[n])

        captured: list[int] = []
        removed_own: list[int] = []
        if cap_ids:
            for cid in cap_ids:
                captured.extend(chains[cid].stones)
        else:
            if not has_liberty:
                for cid in friendly_ids:
                    if len(chains[cid].liberties) > 1:
                        has_liberty = True
                        break
            if not has_liberty:
                # Suicide: the merged own chain ends with no liberties.
                if not self.rules.suicide_allowed:
                    raise SuicideError(
                        f"{COLOR_NAMES[color]} {format_vertex(v, size)} is suicide")
                removed_own.append(v)
                for cid in friendly_ids:
                    removed_own.extend(chains[cid].stones)

        h = self.hash ^ tables[EMPTY][v] ^ tables[color][v]
        if not removed_own:
            if not captured:
                # No cells change besides v; grid built lazily by caller.
                return None, h, (), ()
            g = bytearray(grid)
            g[v] = color
            for cell in captured:
                g[cell] = EMPTY
                h ^= tables[opp][cell] ^ tables[EMPTY][cell]
            return bytes(g), h, tuple(captured), ()
        g = bytearray(grid)
        g[v] = color
        for cell in removed_own:
            g[cell] = EMPTY
            h ^= tables[color][cell] ^ tables[EMPTY][cell]
        return bytes(g), h, (), tuple(removed_own)

    def _violates_superko(self, new_grid: bytes | None, new_hash: int, v: int,
                          color: int) -> bool:
        known = self._positions.get(new_hash)
        if known is None:
            return False
        if new_grid is None:
            g = bytearray(self.grid)
            g[v] = color
            new_grid = bytes(g)
        return new_grid in known

    def is_legal(self, v: int) -> bool:
        """Move legality for the side to move. Does not include terminality."""
        if v == PASS:
            return True
        if not 0 <= v < self.size * self.size:
            return False
        if self.grid[v] != EMPTY:
            return False
        try:
            new_grid, new_hash, _, _ = self._resolve(v)
        except SuicideError:
            return False
        return not self._violates_superko(new_grid, new_hash, v, self.to_move)

    def legal_moves(self) -> list[int]:
        """All legal vertices in row-major order, with PASS last.

        Raises GameOverError on a terminal state (Pass is otherwise always
        legal, so the list is never empty).
        """
        if self.is_terminal():
            raise GameOverError("game is over")
        if self._legal_cache is None:
            moves = [v for v in range(self.size * self.size) if self.is_legal(v)]
            moves.append(PASS)
            self._legal_cache = moves
        return list(self._legal_cache)

    def play(self, v: int) -> "GameState":
        """Apply a move for the side to move, returning the new state.

        Raises a distinct IllegalMoveError subclass per failure mode.
        """
        if self.is_terminal():
            raise GameOverError("game is over")
        color = self.to_move
        history = self.move_history + ((color, v),)
        if v == PASS:
            return GameState(self.rules, self.size, self.grid, opponent(color),
                             self.consecutive_passes + 1, history, self.hash,
                             self._positions)
        if not 0 <= v < self.size * self.size:
            raise OffBoardError(f"vertex {v} off the board")
        if self.grid[v] != EMPTY:
            raise OccupiedVertexError(f"{format_vertex(v, self.size)} occupied")
        new_grid, new_hash, _, _ = self._resolve(v)
        if new_grid is None:
            g = bytearray(self.grid)
            g[v] = color
            new_grid = bytes(g)
        if self._violates_superko(new_grid, new_hash, v, color):
            raise SuperkoError(
                f"{format_vertex(v, self.size)} recreates a previous position")
        positions = dict(self._positions)
        prev = positions.get(new_hash)
        if prev is None:
            positions[new_hash] = (new_grid,)
        elif new_grid not in prev:  # 64-bit collision guard
            positions[new_hash] = prev + (new_grid,)
        return GameState(self.rules, self.size, new_grid, opponent(color), 0,
                         history, new_hash, positions)

    def last_move(self) -> tuple[int, int] | None:
        return self.move_history[-1] if self.move_history else None

    def diagram(self) -> str:
        return board_diagram(self.grid, self.size)

    def __repr__(self):
        return (f"<GameState {self.size}x{self.size} move "
                f"{len(self.move_history)} {COLOR_NAMES[self.to_move]} to move>")


def new_game(rules: Rules) -> GameState:
    """Fresh empty-board state, Black to move."""
    if not isinstance(rules, Rules):
        raise TypeError("rules must be a Rules instance")
    size = rules.board_size
    grid = bytes(size * size)
    h = empty_board_hash(size)
    return GameState(rules, size, grid, BLACK, 0, (), h, {h: (grid,)})


def replay_moves(rules: Rules, moves) -> GameState:
    """Replay a (color, vertex) or plain vertex sequence from an empty board."""
    state = new_game(rules)
    for mv in moves:
        v = mv[1] if isinstance(mv, tuple) else mv
        state = state.play(v)
    return state


# -- scoring ---------------------------------------------------------------

def _empty_region_owners(grid: bytes, size: int) -> list[int]:
    """Owner per cell for empty regions: BLACK/WHITE if the region reaches
    only that color, else EMPTY. Stone cells keep their own color."""
    neigh = neighbor_table(size)
    owners = list(grid)
    seen = bytearray(size * size)
    for start, cell in enumerate(grid):
        if cell != EMPTY or seen[start]:
            continue
        region = [start]
        seen[start] = 1
        stack = [start]
        reaches_black = reaches_white = False
        while stack:
            cur = stack.pop()
            for n in neigh[cur]:
                v = grid[n]
                if v == EMPTY:
                    if not seen[n]:
                        seen[n] = 1
                        region.append(n)
                        stack.append(n)
                elif v == BLACK:
                    reaches_black = True
                else:
                    reaches_white = True
        if reaches_black and not reaches_white:
            owner = BLACK
        elif reaches_white and not reaches_black:
            owner = WHITE
        else:
            owner = EMPTY
        for cell_ in region:
            owners[cell_] = owner
    return owners


def score_tromp_taylor(state: GameState) -> Score:
    """Area score: stones plus empty regions reaching only one color."""
    owners = _empty_region_owners(state.grid, state.size)
    black = float(owners.count(BLACK))
    white = float(owners.count(WHITE)) + state.rules.komi
    if black > white:
        winner = BLACK
    elif white > black:
        winner = WHITE
    else:
        winner = DRAW
    return Score(black, white, winner, abs(black - white))


def territory_ownership(state: GameState) -> list[int]:
    """Per-cell area assignment: +1 black, -1 white, 0 neutral."""
    owners = _empty_region_owners(state.grid, state.size)
    return [1 if o == BLACK else -1 if o == WHITE else 0 for o in owners]


def board_diagram(grid: bytes, size: int) -> str:
    """Text diagram: X black, O white, '.' empty; GTP-style coordinates."""
    cols = " ".join(GTP_COLUMNS[:size])
    lines = [f"   {cols}"]
    for r in range(size):
        row = " ".join(".XO"[grid[r * size + c]] for c in range(size))
        lines.append(f"{size - r:2d} {row}")
    return "\n".join(lines)
