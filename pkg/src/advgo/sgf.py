"""SGF reading and writing (FF[4] subset: B, W, SZ, KM, RE).

The writer emits a single linear game record. The parser accepts the same
subset, ignores unknown properties, and reports malformed input with the
character position. Games produced by this package round-trip losslessly.
"""

from __future__ import annotations

from .board import (BLACK, PASS, WHITE, GameState, Rules, new_game,
                    vertex, vertex_rc)

_LETTERS = "abcdefghijklmnopqrs"


class SgfError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at character {pos}")
        self.pos = pos


def _move_text(v: int, size: int) -> str:
    if v == PASS:
        return ""
    r, c = vertex_rc(v, size)
    return _LETTERS[c] + _LETTERS[r]


def game_to_sgf(rules: Rules, moves, result: str | None = None) -> str:
    """Serialize a (color, vertex) move sequence."""
    parts = [f"(;FF[4]GM[1]SZ[{rules.board_size}]KM[{rules.komi:g}]"]
    if result is not None:
        parts.append(f"RE[{result}]")
    for color, v in moves:
        tag = "B" if color == BLACK else "W"
        parts.append(f";{tag}[{_move_text(v, rules.board_size)}]")
    parts.append(")")
    return "".join(parts)


def state_to_sgf(state: GameState, result: str | None = None) -> str:
    return game_to_sgf(state.rules, state.move_history, result)


def _tokenize(text: str):
    """Yield ('node', pos) / ('prop', ident, [values], pos) events for the
    main line of the first game tree."""
    i = 0
    n = len(text)

    def skip_ws(j):
        while j < n and text[j].isspace():
            j += 1
        return j

    i = skip_ws(i)
    if i >= n or text[i] != "(":
        raise SgfError("expected '('", i)
    i += 1
    depth = 1
    while True:
        i = skip_ws(i)
        if i >= n:
            raise SgfError("unexpected end of input", i)
        ch = text[i]
        if ch == ")":
            depth -= 1
            i += 1
            if depth == 0:
                return
            continue
        if ch == "(":
            # Variations: follow only the first branch, skip the rest later.
            depth += 1
            i += 1
            continue
        if ch == ";":
            yield ("node", i)
            i += 1
            continue
        if ch.isalpha():
            start = i
            while i < n and text[i].isalpha():
                i += 1
            ident = text[start:i]
            values = []
            i = skip_ws(i)
            if i >= n or text[i] != "[":
                raise SgfError(f"property {ident} missing value", i)
            while i < n and text[i] == "[":
                i += 1
                buf = []
                while i < n and text[i] != "]":
                    if text[i] == "\\" and i + 1 < n:
                        i += 1
                    buf.append(text[i])
                    i += 1
                if i >= n:
                    raise SgfError("unterminated property value", i)
                i += 1  # closing bracket
                values.append("".join(buf))
                i = skip_ws(i)
            yield ("prop", ident, values, start)
            continue
        raise SgfError(f"unexpected character {ch!r}", i)


def parse_sgf(text: str):
    """Parse to (rules, moves, properties). Moves are (color, vertex)."""
    size = 19
    komi = 7.5
    moves: list[tuple[int, int]] = []
    props: dict[str, str] = {}
    pending: list[tuple[str, str, int]] = []
    for event in _tokenize(text):
        if event[0] == "node":
            continue
        _, ident, values, pos = event
        if ident in ("B", "W"):
            pending.append((ident, values[0], pos))
        elif ident == "SZ":
            try:
                size = int(values[0])
            except ValueError:
                raise SgfError(f"bad SZ value {values[0]!r}", pos) from None
        elif ident == "KM":
            try:
                komi = float(values[0])
            except ValueError:
                raise SgfError(f"bad KM value {values[0]!r}", pos) from None
        else:
            props.setdefault(ident, values[0] if values else "")
    rules = Rules(board_size=size, komi=komi)
    for ident, value, pos in pending:
        color = BLACK if ident == "B" else WHITE
        if value in ("", "tt"):
            moves.append((color, PASS))
            continue
        if len(value) != 2:
            raise SgfError(f"bad move value {value!r}", pos)
        col = _LETTERS.find(value[0])
        row = _LETTERS.find(value[1])
        if col < 0 or row < 0 or col >= size or row >= size:
            raise SgfError(f"move {value!r} outside the board", pos)
        moves.append((color, vertex(row, col, size)))
    return rules, moves, props


def from_sgf(text: str) -> GameState:
    """Replay an SGF record into a GameState."""
    rules, moves, _ = parse_sgf(text)
    state = new_game(rules)
    for color, v in moves:
        if color != state.to_move:
            raise SgfError("moves out of turn order", 0)
        state = state.play(v)
    return state
