"""Exploit training against a frozen victim, plus victim self-play.

Training games pit the learning adversary (moving through the
victim-modelling search) against a fixed victim agent. Examples are
harvested only at adversary turns: the policy target is the normalized
weighted root-visit distribution, the value target the final result from
the adversary's perspective, the ownership target the final area map, and
the opponent-move target the victim's actual reply. A curriculum advances
to the next victim whenever the windowed win rate exceeds 0.5. The replay
buffer enforces a maximum reuse count per row and evicts FIFO.

Everything is driven by one master seed: per-game rng streams derive from
(seed, worker_id, game_index), so results do not depend on scheduling and
two runs with the same seed produce bit-identical metric logs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import net as netmod
from .adversary import AdversarySearchConfig, VictimHandle
from .agents import Agent, AdversaryAgent, PolicyVictim
from .board import (BLACK, DRAW, PASS, WHITE, GameState, Rules, new_game,
                    score_tromp_taylor, territory_ownership)
from .search import SearchConfig
from .stats import clopper_pearson_fractional


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Deterministic child stream: (seed, worker-id, game-index, ...)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class TrainingExample:
    planes: np.ndarray
    legal_mask: np.ndarray
    policy_target: np.ndarray
    value_target: float = 0.0
    ownership_target: Optional[np.ndarray] = None
    opponent_target: int = -1  # flat move index; -1 when the game ended


@dataclass
class GameRecord:
    """A finished game, replayable through the rules engine."""

    rules: Rules
    moves: list[tuple[int, int]]
    adversary_color: int
    victim_id: str
    score: object
    search_dists: list[Optional[np.ndarray]] = field(default_factory=list)
    value_estimates: list[Optional[float]] = field(default_factory=list)
    forward_passes_per_move: int = 0

    def replay(self) -> GameState:
        state = new_game(self.rules)
        for _, v in self.moves:
            state = state.play(v)
        return state

    def adversary_result(self) -> float:
        """1 win, 0.5 draw, 0 loss from the adversary's side."""
        if self.score.winner == DRAW:
            return 0.5
        return 1.0 if self.score.winner == self.adversary_color else 0.0

    def length(self) -> int:
        return len(self.moves)


@dataclass
class VictimSpec:
    """How the victim actually plays plus the gray-box handle the
    adversary's search uses to model it."""

    agent: Agent
    handle: VictimHandle
    victim_id: str = "victim"


def generate_game(adversary_eval, victim: VictimSpec,
                  config: AdversarySearchConfig, rules: Rules,
                  adversary_color: int, rng: np.random.Generator,
                  collect_examples: bool = True,
                  keep_dists: bool = False,
                  sample_moves: int | None = None,
                  late_tau: float = 0.3):
    """Play one adversary-vs-victim game.

    Returns (GameRecord, examples); examples originate exclusively from
    positions where the adversary moved. Turn-limit games are kept and
    scored like any other. With `sample_moves`, the configured sampling
    temperature applies only to the first that many plies and `late_tau`
    takes over afterwards (policy targets always use the raw visit
    distribution either way).
    """
    from dataclasses import replace as _replace
    adversary = AdversaryAgent(adversary_eval, victim.handle, config)
    late_adversary = None
    if sample_moves is not None and config.search.tau != late_tau:
        late_config = AdversarySearchConfig(
            mode=config.mode,
            search=_replace(config.search, tau=late_tau),
            victim_visits=config.victim_visits)
        late_adversary = AdversaryAgent(adversary_eval, victim.handle,
                                        late_config)
    victim.agent.start_game(rules, BLACK + WHITE - adversary_color)
    state = new_game(rules)
    moves: list[tuple[int, int]] = []
    dists: list[Optional[np.ndarray]] = []
    values: list[Optional[float]] = []
    pending: list[tuple[TrainingExample, int]] = []  # example, move index
    while not state.is_terminal():
        if state.to_move == adversary_color:
            mover = adversary
            if late_adversary is not None and len(moves) >= sample_moves:
                mover = late_adversary
            mv, info = mover.select_move(state, rng)
            if collect_examples:
                example = TrainingExample(
                    planes=netmod.encode(state),
                    legal_mask=netmod.legality_mask(state),
                    policy_target=info["target_distribution"],
                )
                pending.append((example, len(moves)))
            dists.append(info.get("distribution") if keep_dists else None)
            values.append(info.get("value"))
        else:
            mv, info = victim.agent.select_move(state, rng)
            dists.append(None)
            values.append(info.get("value"))
        moves.append((state.to_move, mv))
        state = state.play(mv)
    score = score_tromp_taylor(state)
    record = GameRecord(rules=rules, moves=moves,
                        adversary_color=adversary_color,
                        victim_id=victim.victim_id, score=score,
                        search_dists=dists, value_estimates=values,
                        forward_passes_per_move=config.search.playouts
                        if config.mode != "R"
                        else config.search.playouts * (config.victim_visits + 1))
    examples: list[TrainingExample] = []
    if collect_examples:
        if score.winner == DRAW:
            z = 0.0
        else:
            z = 1.0 if score.winner == adversary_color else -1.0
        area = np.asarray(territory_ownership(state), dtype=np.float64)
        if adversary_color == WHITE:
            area = -area
        size = rules.board_size
        for example, move_idx in pending:
            example.value_target = z
            example.ownership_target = area
            reply_idx = move_idx + 1
            if reply_idx < len(moves):
                v = moves[reply_idx][1]
                example.opponent_target = size * size if v == PASS else v
            examples.append(example)
    return record, examples


# -- replay buffer -----------------------------------------------------------

class BufferStarvedError(Exception):
    """No trainable batch available: every row reached its reuse limit."""


@dataclass
class _Row:
    example: TrainingExample
    uses: int = 0


class ReplayBuffer:
    """FIFO buffer where each row may be trained on at most `reuse_factor`
    times (the trainer then blocks until fresh rows arrive)."""

    def __init__(self, capacity: int = 100_000, reuse_factor: int = 4,
                 min_rows: int = 10_000):
        self.capacity = capacity
        self.reuse_factor = reuse_factor
        self.min_rows = min_rows
        self._rows: list[_Row] = []

    def __len__(self) -> int:
        return len(self._rows)

    def add(self, examples: list[TrainingExample]):
        for ex in examples:
            self._rows.append(_Row(ex))
        if len(self._rows) > self.capacity:
            self._rows = self._rows[len(self._rows) - self.capacity:]

    def usable_indices(self) -> list[int]:
        return [i for i, row in enumerate(self._rows)
                if row.uses < self.reuse_factor]

    def ready(self) -> bool:
        return len(self._rows) >= self.min_rows

    def sample_batch(self, batch_size: int,
                     rng: np.random.Generator) -> list[TrainingExample]:
        usable = self.usable_indices()
        if len(usable) < batch_size:
            raise BufferStarvedError(
                f"{len(usable)} usable rows < batch size {batch_size}")
        picked = rng.choice(len(usable), size=batch_size, replace=False)
        out = []
        for k in picked:
            row = self._rows[usable[int(k)]]
            row.uses += 1
            out.append(row.example)
        return out


def make_batch(examples: list[TrainingExample], board_size: int) -> netmod.Batch:
    n2 = board_size * board_size
    return netmod.Batch(
        planes=np.stack([e.planes for e in examples]),
        legal_mask=np.stack([e.legal_mask for e in examples]),
        policy_target=np.stack([e.policy_target for e in examples]),
        value_target=np.array([e.value_target for e in examples]),
        ownership_target=np.stack([
            e.ownership_target if e.ownership_target is not None
            else np.zeros(n2) for e in examples]),
        opponent_target=np.array([e.opponent_target for e in examples]),
    )


def train_epoch(buffer: ReplayBuffer, net: netmod.Network,
                optimizer: netmod.SgdMomentum, batch_size: int,
                rng: np.random.Generator, max_steps: int,
                weights: netmod.LossWeights | None = None) -> dict:
    """Run up to max_steps optimizer steps, stopping early when the buffer
    has no fresh batch left. Raises BufferStarvedError when not even one
    step was possible."""
    if weights is None:
        weights = netmod.LossWeights()
    steps = 0
    totals = {"loss": 0.0, "policy": 0.0, "value": 0.0, "ownership": 0.0,
              "opponent_move": 0.0}
    while steps < max_steps:
        try:
            examples = buffer.sample_batch(batch_size, rng)
        except BufferStarvedError:
            if steps == 0:
                raise
            break
        batch = make_batch(examples, net.board_size)
        loss, grads, parts = net.loss_and_gradients(batch, weights)
        optimizer.step(net, grads)
        steps += 1
        totals["loss"] += loss
        for k, v in parts.items():
            totals[k] += v
    return {"steps": steps,
            **{k: (v / steps if steps else 0.0) for k, v in totals.items()}}


# -- curriculum ---------------------------------------------------------------

def curriculum_step(win_rate: float | None, stage: int, n_stages: int,
                    threshold: float = 0.5) -> int:
    """Advance exactly one stage when the windowed win rate beats the
    threshold; never regress; clamp at the final stage. A win rate of None
    (window not yet filled) never advances."""
    if win_rate is not None and win_rate > threshold and stage < n_stages - 1:
        return stage + 1
    return min(stage, n_stages - 1)


class CurriculumStalledError(Exception):
    def __init__(self, stage: int, games: int, win_rate: float | None):
        super().__init__(
            f"stage {stage} failed to reach the advance threshold within "
            f"{games} games (window win rate {win_rate})")
        self.stage = stage
        self.games = games
        self.win_rate = win_rate


# -- attack training loop -----------------------------------------------------

@dataclass
class AttackConfig:
    board_size: int = 7
    komi: float = 7.5
    seed: int = 0
    channels: int = 16
    blocks: int = 2
    visits: int = 64
    alpha: float = 1.5
    beta: float = 0.3
    tau: float = 1.0
    mode: str = "S"
    victim_visits: int = 1
    stages: list[str] = field(default_factory=list)  # victim descriptors
    games_per_iter: int = 16
    window: int = 100
    threshold: float = 0.5
    stage_game_budget: int = 2000
    buffer_capacity: int = 100_000
    min_rows: int = 10_000
    reuse_factor: int = 4
    batch_size: int = 256
    steps_per_iter: int = 32
    lr: float = 0.02
    momentum: float = 0.9
    lr_decay_after: Optional[int] = None
    sample_moves: int = 10
    late_tau: float = 0.3
    ownership_weight: float = 0.15
    opponent_weight: float = 0.15
    checkpoint_every: int = 10
    out_dir: str = "attack_out"
    final_stage_goal_windows: int = 1


@dataclass
class AttackResult:
    checkpoints: list[str]
    best_checkpoint: str
    final_checkpoint: str
    metrics_lines: list[str]
    stage_reached: int
    window_win_rate: float


def make_victim(descriptor: str, rules: Rules) -> VictimSpec:
    """Victim bundle from an agent descriptor (victim:... / hardened:...)."""
    from .agents import make_agent, HardenedAgent
    agent = make_agent(descriptor, rules)
    inner = agent.inner if isinstance(agent, HardenedAgent) else agent
    if not isinstance(inner, PolicyVictim):
        raise ValueError(
            f"victim descriptor must name a victim agent, got {descriptor!r}")
    handle = VictimHandle(evaluator=inner.evaluator, search=inner.search)
    return VictimSpec(agent=agent, handle=handle, victim_id=descriptor)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def attack_train(config: AttackConfig,
                 victims: list[VictimSpec] | None = None) -> AttackResult:
    """Alternate game generation and training through the victim curriculum.

    Returns checkpoints plus deterministic metric log lines; also writes
    both under config.out_dir. Raises CurriculumStalledError when a stage
    exhausts its game budget below the advance threshold.
    """
    rules = Rules(board_size=config.board_size, komi=config.komi)
    if victims is None:
        victims = [make_victim(d, rules) for d in config.stages]
    if not victims:
        raise ValueError("no victim stages configured")
    os.makedirs(config.out_dir, exist_ok=True)

    net = netmod.Network(config.board_size, config.channels, config.blocks,
                         seed=config.seed)
    optimizer = netmod.SgdMomentum(config.lr, config.momentum,
                                   config.lr_decay_after)
    weights = netmod.LossWeights(ownership=config.ownership_weight,
                                 opponent_move=config.opponent_weight)
    buffer = ReplayBuffer(config.buffer_capacity, config.reuse_factor,
                          config.min_rows)
    search_cfg = SearchConfig(playouts=config.visits, alpha=config.alpha,
                              beta=config.beta, tau=config.tau)
    adv_cfg = AdversarySearchConfig(mode=config.mode, search=search_cfg,
                                    victim_visits=config.victim_visits)

    lines: list[str] = []
    checkpoints: list[str] = []
    stage = 0
    game_index = 0
    stage_games = 0
    iteration = 0
    results: list[float] = []  # current stage window
    moves_generated = 0
    best_wr = -1.0
    best_path = os.path.join(config.out_dir, "adversary_best.net")
    done = False
    log_path = os.path.join(config.out_dir, "metrics.log")
    log_fh = open(log_path, "w")

    def log(line: str):
        lines.append(line)
        log_fh.write(line + "\n")
        log_fh.flush()

    try:
        while not done:
            iteration += 1
            for _ in range(config.games_per_iter):
                color = BLACK if game_index % 2 == 0 else WHITE
                rng = derive_rng(config.seed, 0, game_index)
                record, examples = generate_game(
                    netmod.NetEvaluator(net), victims[stage], adv_cfg, rules,
                    color, rng, sample_moves=config.sample_moves,
                    late_tau=config.late_tau)
                buffer.add(examples)
                results.append(record.adversary_result())
                if len(results) > config.window:
                    results.pop(0)
                moves_generated += record.length()
                game_index += 1
                stage_games += 1
            window_wr = (sum(results) / len(results)
                         if len(results) >= config.window else None)

            stats = {"steps": 0, "loss": 0.0, "policy": 0.0, "value": 0.0,
                     "ownership": 0.0, "opponent_move": 0.0}
            if buffer.ready():
                try:
                    stats = train_epoch(buffer, net, optimizer, config.batch_size,
                                        derive_rng(config.seed, 1, iteration),
                                        config.steps_per_iter, weights)
                except BufferStarvedError:
                    stats["starved"] = 1

            wr_txt = "na" if window_wr is None else _fmt(window_wr)
            w = sum(results)
            ci_lo, ci_hi = clopper_pearson_fractional(w, len(results)) \
                if results else (0.0, 1.0)
            log(f"iter={iteration} stage={stage} games={game_index} "
                f"stage_games={stage_games} window_wr={wr_txt} "
                f"ci_lo={_fmt(ci_lo)} ci_hi={_fmt(ci_hi)} "
                f"buffer={len(buffer)} steps={stats['steps']} "
                f"loss={_fmt(stats['loss'])} policy={_fmt(stats['policy'])} "
                f"value={_fmt(stats['value'])} own={_fmt(stats['ownership'])} "
                f"opp={_fmt(stats['opponent_move'])} moves={moves_generated}")

            final_stage = stage == len(victims) - 1
            if window_wr is not None and final_stage and window_wr > best_wr:
                best_wr = window_wr
                netmod.save(net, best_path)
            if window_wr is not None and window_wr > config.threshold:
                if final_stage:
                    log(f"stage={stage} complete window_wr={_fmt(window_wr)} "
                        f"games={stage_games}")
                    done = True
                else:
                    log(f"advance from stage={stage} window_wr={_fmt(window_wr)} "
                        f"games={stage_games}")
                    stage += 1
                    stage_games = 0
                    results = []
            if not done and stage_games >= config.stage_game_budget:
                raise CurriculumStalledError(stage, stage_games, window_wr)
            if iteration % config.checkpoint_every == 0:
                path = os.path.join(config.out_dir,
                                    f"adversary_iter{iteration:05d}.net")
                netmod.save(net, path)
                checkpoints.append(path)

    finally:
        log_fh.close()

    final_path = os.path.join(config.out_dir, "adversary_final.net")
    netmod.save(net, final_path)
    if best_wr < 0:
        netmod.save(net, best_path)
    return AttackResult(checkpoints=checkpoints, best_checkpoint=best_path,
                        final_checkpoint=final_path, metrics_lines=lines,
                        stage_reached=stage,
                        window_win_rate=sum(results) / len(results)
                        if results else 0.0)


# -- victim self-play ladder ---------------------------------------------------

@dataclass
class SelfPlayConfig:
    board_size: int = 7
    komi: float = 7.5
    seed: int = 1
    channels: int = 16
    blocks: int = 2
    visits: int = 32
    alpha: float = 1.5
    beta: float = 0.3
    games_per_round: int = 12
    rounds: int = 3
    batch_size: int = 64
    steps_per_round: int = 48
    lr: float = 0.02
    momentum: float = 0.9
    reuse_factor: int = 4
    sample_moves: int = 12  # plies played at tau=1 before tau drops
    late_tau: float = 0.3
    out_dir: str = "victims"


def selfplay_game(net: netmod.Network, cfg: SelfPlayConfig, rules: Rules,
                  rng: np.random.Generator) -> tuple[GameRecord,
                                                     list[TrainingExample]]:
    """One ordinary self-play game harvesting examples from both turns."""
    from .search import run_search, visit_distribution
    evaluator = netmod.NetEvaluator(net)
    state = new_game(rules)
    moves: list[tuple[int, int]] = []
    stamped: list[tuple[TrainingExample, int, int]] = []  # ex, to_move, idx
    while not state.is_terminal():
        tau = 1.0 if len(moves) < cfg.sample_moves else cfg.late_tau
        sc = SearchConfig(playouts=cfg.visits, alpha=cfg.alpha, beta=cfg.beta,
                          tau=tau)
        tree = run_search(state, evaluator, sc, rng)
        dist = visit_distribution(tree, tau)
        target = dist if tau == 1.0 else visit_distribution(tree, 1.0)
        flat = int(rng.choice(len(dist), p=dist))
        mv = PASS if flat == rules.board_size ** 2 else flat
        example = TrainingExample(planes=netmod.encode(state),
                                  legal_mask=netmod.legality_mask(state),
                                  policy_target=target)
        stamped.append((example, state.to_move, len(moves)))
        moves.append((state.to_move, mv))
        state = state.play(mv)
    score = score_tromp_taylor(state)
    area = np.asarray(territory_ownership(state), dtype=np.float64)
    size = rules.board_size
    examples = []
    for example, mover, idx in stamped:
        if score.winner == DRAW:
            example.value_target = 0.0
        else:
            example.value_target = 1.0 if score.winner == mover else -1.0
        example.ownership_target = area if mover == BLACK else -area
        if idx + 1 < len(moves):
            v = moves[idx + 1][1]
            example.opponent_target = size * size if v == PASS else v
        examples.append(example)
    record = GameRecord(rules=rules, moves=moves, adversary_color=BLACK,
                        victim_id="selfplay", score=score)
    return record, examples


def train_victim_ladder(cfg: SelfPlayConfig) -> list[str]:
    """Brief self-play training emitting one checkpoint per round."""
    rules = Rules(board_size=cfg.board_size, komi=cfg.komi)
    net = netmod.Network(cfg.board_size, cfg.channels, cfg.blocks,
                         seed=cfg.seed)
    optimizer = netmod.SgdMomentum(cfg.lr, cfg.momentum)
    buffer = ReplayBuffer(capacity=50_000, reuse_factor=cfg.reuse_factor,
                          min_rows=cfg.batch_size)
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = []
    game_index = 0
    for rnd in range(cfg.rounds):
        for _ in range(cfg.games_per_round):
            rng = derive_rng(cfg.seed, 2, game_index)
            _, examples = selfplay_game(net, cfg, rules, rng)
            buffer.add(examples)
            game_index += 1
        if buffer.ready():
            try:
                train_epoch(buffer, net, optimizer, cfg.batch_size,
                            derive_rng(cfg.seed, 3, rnd), cfg.steps_per_round)
            except BufferStarvedError:
                pass
        path = os.path.join(cfg.out_dir, f"victim_r{rnd}.net")
        netmod.save(net, path)
        paths.append(path)
    return paths
