"""Match runner and game analysis.

Matches alternate colors between the two agents; per-game rng streams
derive from (seed, game index, color), so swapping the agent order while
flipping the first-black flag reproduces the identical games with the
agents' colors exchanged. Draws count half a win; the Clopper-Pearson
interval brackets fractional counts with floor/ceil. Agent exceptions abort
only their own game and are reported separately, never scored as losses.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .agents import Agent
from .board import (BLACK, DRAW, WHITE, GameState, Rules, new_game,
                    score_tromp_taylor)
from .sgf import game_to_sgf
from .stats import clopper_pearson_fractional
from .training import GameRecord, derive_rng


@dataclass
class MatchStats:
    games: int
    wins: float  # for agent A; draws count 0.5
    win_rate: float
    ci_lo: float
    ci_hi: float
    ci_level: float
    mean_margin: float  # mean signed score difference, A minus B
    mean_game_length: float
    errors: int = 0
    forward_passes_per_move: dict[str, float] = field(default_factory=dict)

    def summary_line(self) -> str:
        return (f"games={self.games} wins={self.wins:g} "
                f"win_rate={self.win_rate:.6g} "
                f"ci=({self.ci_lo:.6g},{self.ci_hi:.6g}) "
                f"mean_margin={self.mean_margin:.6g} "
                f"mean_length={self.mean_game_length:.6g} "
                f"errors={self.errors}")


class AgentFailure(Exception):
    def __init__(self, game_index: int, agent_name: str, cause: Exception):
        super().__init__(f"agent {agent_name} failed in game {game_index}: "
                         f"{cause!r}")
        self.game_index = game_index
        self.agent_name = agent_name
        self.cause = cause


def play_game(black: Agent, white: Agent, rules: Rules,
              black_rng: np.random.Generator,
              white_rng: np.random.Generator,
              keep_dists: bool = False,
              forward_passes: dict | None = None) -> GameRecord:
    """One game between two agents; the record is black-perspective-free.

    `forward_passes` optionally accumulates per-agent-name network query
    counts reported by the agents (nominal accounting: one per playout).
    """
    black.start_game(rules, BLACK)
    white.start_game(rules, WHITE)
    state = new_game(rules)
    moves: list[tuple[int, int]] = []
    dists: list[Optional[np.ndarray]] = []
    values: list[Optional[float]] = []
    while not state.is_terminal():
        if state.to_move == BLACK:
            agent, mv, info = black, *black.select_move(state, black_rng)
        else:
            agent, mv, info = white, *white.select_move(state, white_rng)
        moves.append((state.to_move, mv))
        dists.append(info.get("distribution") if keep_dists else None)
        values.append(info.get("value"))
        if forward_passes is not None and "forward_passes" in info:
            bucket = forward_passes.setdefault(agent.name, [0, 0])
            bucket[0] += info["forward_passes"]
            bucket[1] += 1
        state = state.play(mv)
    score = score_tromp_taylor(state)
    return GameRecord(rules=rules, moves=moves, adversary_color=BLACK,
                      victim_id=white.name, score=score, search_dists=dists,
                      value_estimates=values)


def play_match(agent_a: Agent | Callable[[], Agent],
               agent_b: Agent | Callable[[], Agent],
               n: int, rules: Rules, seed: int,
               first_black: int = 0, ci_level: float = 0.95,
               sgf_dir: str | None = None,
               on_game=None) -> tuple[MatchStats, list[GameRecord]]:
    """Play n games with alternating colors and aggregate statistics.

    Game i gives agent A black when (i + first_black) is even. Per-game rng
    streams attach to the color, not the agent, which makes
    play_match(a, b, seed) and play_match(b, a, seed, first_black=1) yield
    the same games with colors swapped.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a = agent_a() if callable(agent_a) else agent_a
    b = agent_b() if callable(agent_b) else agent_b
    if sgf_dir:
        os.makedirs(sgf_dir, exist_ok=True)
    records: list[GameRecord] = []
    wins = 0.0
    margin_sum = 0.0
    length_sum = 0
    errors = 0
    fp_totals: dict[str, list[int]] = {}
    for i in range(n):
        a_black = (i + first_black) % 2 == 0
        black, white = (a, b) if a_black else (b, a)
        black_rng = derive_rng(seed, i, 0)
        white_rng = derive_rng(seed, i, 1)
        try:
            record = play_game(black, white, rules, black_rng, white_rng,
                               forward_passes=fp_totals)
        except Exception as exc:  # noqa: BLE001 - agent errors are data here
            errors += 1
            if on_game is not None:
                on_game(i, None, AgentFailure(i, f"{black.name}/{white.name}",
                                              exc))
            continue
        records.append(record)
        score = record.score
        a_color = BLACK if a_black else WHITE
        if score.winner == DRAW:
            wins += 0.5
            margin = 0.0
        elif score.winner == a_color:
            wins += 1.0
            margin = score.margin
        else:
            margin = -score.margin
        margin_sum += margin
        length_sum += record.length()
        if sgf_dir:
            path = os.path.join(sgf_dir, f"game{i:05d}.sgf")
            with open(path, "w") as fh:
                fh.write(game_to_sgf(rules, record.moves,
                                     score.formatted()) + "\n")
        if on_game is not None:
            on_game(i, record, None)
    played = n - errors
    if played == 0:
        raise AgentFailure(-1, "all", RuntimeError("every game errored"))
    ci_lo, ci_hi = clopper_pearson_fractional(wins, played, ci_level)
    stats = MatchStats(
        games=played, wins=wins, win_rate=wins / played,
        ci_lo=ci_lo, ci_hi=ci_hi, ci_level=ci_level,
        mean_margin=margin_sum / played,
        mean_game_length=length_sum / played, errors=errors,
        forward_passes_per_move={name: total / count
                                 for name, (total, count) in fp_totals.items()
                                 if count})
    return stats, records


def match_log_lines(stats: MatchStats, records: list[GameRecord],
                    a_name: str, b_name: str) -> list[str]:
    """Deterministic line-delimited match log (one line per game plus a
    summary); identical inputs yield byte-identical lines."""
    lines = [f"match a={a_name} b={b_name} n={stats.games}"]
    for i, record in enumerate(records):
        lines.append(f"game={i} result={record.score.formatted()} "
                     f"moves={record.length()}")
    lines.append(stats.summary_line())
    return lines


@dataclass
class ValueTracePoint:
    move_index: int
    to_move: int
    win_probability: float
    losing_if_game_ended: bool
    flagged: bool


def analyze_game(record: GameRecord, victim_value,
                 threshold: float = 0.995) -> list[ValueTracePoint]:
    """Victim value trace over a recorded game.

    `victim_value` maps a state to the win probability for the side to
    move. A position is flagged when that probability exceeds `threshold`
    while an immediate double pass would actually lose the game for the
    player to move (area scoring of the current grid).
    """
    state = new_game(record.rules)
    trace: list[ValueTracePoint] = []

    def point(idx: int, st: GameState):
        p = float(victim_value(st))
        score = score_tromp_taylor(st)
        losing = score.winner not in (st.to_move, DRAW)
        trace.append(ValueTracePoint(idx, st.to_move, p, losing,
                                     p > threshold and losing))

    point(0, state)
    for idx, (_, v) in enumerate(record.moves):
        state = state.play(v)
        if not state.is_terminal():
            point(idx + 1, state)
    return trace
