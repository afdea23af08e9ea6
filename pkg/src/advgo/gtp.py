"""Go Text Protocol server for a single agent.

Speaks the subset protocol_version, name, version, known_command,
list_commands, boardsize, komi, clear_board, play, genmove, final_score,
showboard, quit. Responses follow the wire framing exactly: "=" or "?", an
optional command id, one space, the payload, then a blank line.
"""

from __future__ import annotations

import sys

import numpy as np

from .agents import Agent
from .board import (BLACK, WHITE, GameOverError, IllegalMoveError,
                    Rules, format_vertex, new_game, parse_vertex,
                    score_tromp_taylor)

_COMMANDS = ("protocol_version", "name", "version", "known_command",
             "list_commands", "boardsize", "komi", "clear_board", "play",
             "genmove", "final_score", "showboard", "quit")


def _parse_color(token: str) -> int:
    t = token.strip().lower()
    if t in ("b", "black"):
        return BLACK
    if t in ("w", "white"):
        return WHITE
    raise ValueError(f"bad color {token!r}")


class GtpServer:
    def __init__(self, agent: Agent, rules: Rules | None = None,
                 seed: int = 0, version: str = "0.1.0"):
        self.agent = agent
        self.rules = rules or Rules(board_size=19)
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.version = version
        self.state = new_game(self.rules)
        self.agent.start_game(self.rules, BLACK)

    # -- command handlers --------------------------------------------------

    def _reset(self):
        self.state = new_game(self.rules)
        self.agent.start_game(self.rules, BLACK)

    def cmd_protocol_version(self, args):
        return "2"

    def cmd_name(self, args):
        return "advgo"

    def cmd_version(self, args):
        return self.version

    def cmd_known_command(self, args):
        return "true" if args and args[0] in _COMMANDS else "false"

    def cmd_list_commands(self, args):
        return "\n".join(_COMMANDS)

    def cmd_boardsize(self, args):
        try:
            size = int(args[0])
            self.rules = Rules(board_size=size, komi=self.rules.komi,
                               suicide_allowed=self.rules.suicide_allowed)
        except (IndexError, ValueError):
            raise ValueError("unacceptable size") from None
        self._reset()
        return ""

    def cmd_komi(self, args):
        try:
            komi = float(args[0])
            self.rules = Rules(board_size=self.rules.board_size, komi=komi,
                               suicide_allowed=self.rules.suicide_allowed)
        except (IndexError, ValueError):
            raise ValueError("syntax error") from None
        self._reset()
        return ""

    def cmd_clear_board(self, args):
        self._reset()
        return ""

    def cmd_play(self, args):
        if len(args) < 2:
            raise ValueError("syntax error")
        color = _parse_color(args[0])
        if color != self.state.to_move:
            raise ValueError("wrong color to move")
        v = parse_vertex(args[1], self.rules.board_size)
        try:
            self.state = self.state.play(v)
        except IllegalMoveError:
            raise ValueError("illegal move") from None
        return ""

    def cmd_genmove(self, args):
        if not args:
            raise ValueError("syntax error")
        color = _parse_color(args[0])
        if color != self.state.to_move:
            raise ValueError("wrong color to move")
        if self.state.is_terminal():
            return "pass"
        mv, _ = self.agent.select_move(self.state, self.rng)
        self.state = self.state.play(mv)
        return format_vertex(mv, self.rules.board_size)

    def cmd_final_score(self, args):
        return score_tromp_taylor(self.state).formatted()

    def cmd_showboard(self, args):
        return "\n" + self.state.diagram()

    def handle(self, line: str) -> tuple[str | None, bool]:
        """One request -> (framed response or None for empty input, quit?)."""
        raw = line.split("#", 1)[0].strip()
        if not raw:
            return None, False
        parts = raw.split()
        cmd_id = ""
        if parts[0].isdigit():
            cmd_id = parts[0]
            parts = parts[1:]
        if not parts:
            return f"?{cmd_id} syntax error\n\n", False
        cmd, args = parts[0], parts[1:]
        if cmd == "quit":
            return f"={cmd_id}\n\n", True
        handler = getattr(self, f"cmd_{cmd}", None)
        if handler is None or cmd not in _COMMANDS:
            return f"?{cmd_id} unknown command\n\n", False
        try:
            payload = handler(args)
        except ValueError as exc:
            return f"?{cmd_id} {exc}\n\n", False
        except GameOverError:
            return f"?{cmd_id} game over\n\n", False
        sep = " " if payload else ""
        return f"={cmd_id}{sep}{payload}\n\n", False


def serve(agent: Agent, rules: Rules | None = None, seed: int = 0,
          in_stream=None, out_stream=None):
    """Run the request loop until quit or EOF."""
    in_stream = in_stream or sys.stdin
    out_stream = out_stream or sys.stdout
    server = GtpServer(agent, rules, seed)
    for line in in_stream:
        response, quit_ = server.handle(line)
        if response is not None:
            out_stream.write(response)
            out_stream.flush()
        if quit_:
            break
