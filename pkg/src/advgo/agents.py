"""Move-producing agents and the descriptor strings that name them.

Every agent yields a move *distribution* over size*size + 1 slots (pass
last) and draws its actual move from it, so wrappers such as pass-hardening
can rescale probabilities without knowing how the inner agent works.

Descriptor grammar (CLI and arena):

    random | edge | spiral | mirror | alwayspass | connector | gapfill
    net:path=<weights>[,visits=64][,tau=0][,sym=1]
    adversary:path=<weights>,victim=<weights>[,mode=S|SPP|R][,visits=48]
        [,tau=0][,victim_visits=4]
    victim:path=<weights>[,tau=1][,pass_value=0.995][,judge_temp=2.0]
        [,visits=0]
    hardened:<any descriptor>      (composes the pass-hardening defense)
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .benson import pass_hardened_filter
from .board import (BLACK, EMPTY, PASS, WHITE, GameState, Rules, board_chains,
                    neighbor_table, opponent)
from .search import EvalResult, SearchConfig, run_search, visit_distribution
from .adversary import (AdversarySearchConfig, VictimHandle,
                        run_adversary_search)

def _pass_slot(size: int) -> int:
    return size * size


def _flat(v: int, size: int) -> int:
    return _pass_slot(size) if v == PASS else v


def _unflat(i: int, size: int) -> int:
    return PASS if i == _pass_slot(size) else i


def sample_move(dist: np.ndarray, size: int, rng: np.random.Generator) -> int:
    return _unflat(int(rng.choice(len(dist), p=dist)), size)


class Agent:
    """Base agent: subclasses implement move_distribution."""

    name = "agent"

    def start_game(self, rules: Rules, color: int):
        """Reset per-game state (cursors, caches)."""

    def move_distribution(self, state: GameState,
                          rng: np.random.Generator) -> tuple[np.ndarray, dict]:
        raise NotImplementedError

    def select_move(self, state: GameState,
                    rng: np.random.Generator) -> tuple[int, dict]:
        dist, info = self.move_distribution(state, rng)
        return sample_move(dist, state.size, rng), info


def _one_hot(v: int, size: int) -> np.ndarray:
    dist = np.zeros(size * size + 1)
    dist[_flat(v, size)] = 1.0
    return dist


class RandomAgent(Agent):
    name = "random"

    def move_distribution(self, state, rng):
        legal = state.legal_moves()
        dist = np.zeros(state.size * state.size + 1)
        for v in legal:
            dist[_flat(v, state.size)] = 1.0 / len(legal)
        return dist, {}


class AlwaysPassAgent(Agent):
    name = "alwayspass"

    def move_distribution(self, state, rng):
        return _one_hot(PASS, state.size), {}


class PlayKThenPassAgent(Agent):
    """Plays the first k scripted vertices (skipping illegal ones), then
    passes forever. Handy as a forced-outcome arena opponent."""

    name = "playthenpass"

    def __init__(self, moves: list[int]):
        self.moves = list(moves)
        self._i = 0

    def start_game(self, rules, color):
        self._i = 0

    def move_distribution(self, state, rng):
        while self._i < len(self.moves):
            v = self.moves[self._i]
            self._i += 1
            if state.is_legal(v):
                return _one_hot(v, state.size), {}
        return _one_hot(PASS, state.size), {}


class EdgeAgent(Agent):
    name = "edge"

    def move_distribution(self, state, rng):
        from .baselines import edge_move
        return _one_hot(edge_move(state, rng), state.size), {}


class SpiralAgent(Agent):
    name = "spiral"

    def __init__(self):
        self._cursor = None

    def start_game(self, rules, color):
        from .baselines import SpiralCursor
        self._cursor = SpiralCursor(rules.board_size)

    def move_distribution(self, state, rng):
        from .baselines import SpiralCursor
        if self._cursor is None:
            self._cursor = SpiralCursor(state.size)
        return _one_hot(self._cursor.next_move(state), state.size), {}


class MirrorAgent(Agent):
    name = "mirror"

    def move_distribution(self, state, rng):
        from .baselines import mirror_move
        return _one_hot(mirror_move(state), state.size), {}


class SearchAgent(Agent):
    """Network plus plain tree search (self-play model of the opponent)."""

    name = "net"

    def __init__(self, evaluator, config: SearchConfig):
        self.evaluator = evaluator
        self.config = config

    def move_distribution(self, state, rng):
        if self.config.playouts == 0:
            res = self.evaluator(state)
            from .search import masked_policy
            legal = state.legal_moves()
            dist = np.zeros(state.size * state.size + 1)
            mass, _ = masked_policy(res.policy, legal, state.size)
            for v, m in zip(legal, mass):
                dist[_flat(v, state.size)] = m
            return dist, {"value": res.value, "forward_passes": 1}
        tree = run_search(state, self.evaluator, self.config, rng)
        dist = visit_distribution(tree, self.config.tau)
        info = {"value": tree.root.mean_value,
                "forward_passes": self.config.playouts}
        return dist, info


class AdversaryAgent(Agent):
    """Adversary network driving the victim-modelling search."""

    name = "adversary"

    def __init__(self, evaluator, victim: VictimHandle,
                 config: AdversarySearchConfig):
        self.evaluator = evaluator
        self.victim = victim
        self.config = config

    def move_distribution(self, state, rng):
        res = run_adversary_search(state, self.evaluator, self.victim,
                                   self.config, rng)
        info = {"value": res.tree.root.mean_value,
                "forward_passes": res.forward_passes,
                "notes": res.tree.log_notes}
        return res.distribution, info

    def select_move(self, state, rng):
        res = run_adversary_search(state, self.evaluator, self.victim,
                                   self.config, rng)
        info = {"value": res.tree.root.mean_value,
                "distribution": res.distribution,
                "target_distribution": res.target_distribution,
                "forward_passes": res.forward_passes,
                "notes": res.tree.log_notes}
        return res.move, info


class NaiveScoreJudge:
    """Win-probability estimate that writes off cornered enemy chains.

    Mirrors the overconfident judgement that makes premature passing look
    safe: an opponent chain with no one-point eye and at most
    `dead_liberty_limit` liberties is deleted before area scoring (it
    "would obviously die"), and the believed margin is squashed through a
    logistic whose sharpness grows with board occupancy, so early positions
    stay uncertain. Under area scoring the deleted stones in fact keep
    counting for the opponent until actually captured, which is exactly the
    gap an exploiting opponent can drive a premature pass through.
    """

    def __init__(self, temperature: float = 2.0,
                 dead_liberty_limit: int = 3):
        self.temperature = temperature
        self.dead_liberty_limit = dead_liberty_limit

    def _believed_grid(self, state: GameState, color: int) -> bytes:
        grid = state.grid
        size = state.size
        neigh = neighbor_table(size)
        ids, chains = board_chains(grid, size)
        out = bytearray(grid)
        opp = opponent(color)
        for ch in chains:
            if ch.color != opp or len(ch.liberties) > self.dead_liberty_limit:
                continue
            stones = set(ch.stones)
            has_eye = any(
                all(n in stones for n in neigh[lib]) for lib in ch.liberties)
            if not has_eye:
                for cell in ch.stones:
                    out[cell] = EMPTY
        return bytes(out)

    def believed_margin(self, state: GameState, color: int) -> float:
        """Area margin for `color` after deleting believed-dead chains."""
        from .board import _empty_region_owners
        believed = self._believed_grid(state, color)
        owners = _empty_region_owners(believed, state.size)
        black = owners.count(BLACK)
        white = owners.count(WHITE) + state.rules.komi
        return float(black - white) if color == BLACK else float(white - black)

    def winprob(self, state: GameState, color: int) -> float:
        size = state.size
        margin = self.believed_margin(state, color)
        occupancy = sum(1 for c in state.grid if c != EMPTY) / (size * size)
        return 1.0 / (1.0 + math.exp(-margin * occupancy / self.temperature))

    def true_margin(self, state: GameState, color: int) -> float:
        """Plain area margin of the position as it stands."""
        from .board import _empty_region_owners
        owners = _empty_region_owners(state.grid, state.size)
        black = owners.count(BLACK)
        white = owners.count(WHITE) + state.rules.komi
        return float(black - white) if color == BLACK else float(white - black)

    def search_value(self, state: GameState, color: int,
                     belief_weight: float = 0.5) -> float:
        """Leaf value in [-1, 1] for search guidance: a blend of the
        believed and the actual margin (no occupancy discount so early
        positions still rank moves). The actual-margin share is what makes
        the player bother to really capture the stones it has written off.
        """
        margin = (belief_weight * self.believed_margin(state, color)
                  + (1.0 - belief_weight) * self.true_margin(state, color))
        return math.tanh(margin / 12.0)


class JudgedEvaluator:
    """Victim evaluator: network policy priors, believed-score value.

    The value head shares the naive judgement of the victim's pass trigger
    (opponent chains it has written off are scored as dead), blended with
    the plain area margin so that executing captures still pays.
    """

    def __init__(self, policy_evaluator, judge: "NaiveScoreJudge",
                 belief_weight: float = 0.5):
        self.policy_evaluator = policy_evaluator
        self.judge = judge
        self.belief_weight = belief_weight

    def __call__(self, state: GameState) -> EvalResult:
        res = self.policy_evaluator(state)
        value = self.judge.search_value(state, state.to_move,
                                        self.belief_weight)
        return EvalResult(value=value, policy=res.policy)


class PolicyVictim(Agent):
    """A frozen victim that samples its policy network each turn.

    With a `judge`, the victim passes whenever its judged win probability
    exceeds `pass_value` (it keeps a sliver of policy mass so the
    pass-hardening wrapper degrades to plain policy play instead of
    uniform). With a `search` config it plays search-backed moves instead of
    raw policy samples. `trigger_pass_only` strips the network's own pass
    mass, so the victim passes exactly when its judgement says the game is
    decided (or nothing else is legal); desk-scale networks otherwise leak
    meaningless early passes.
    """

    name = "victim"

    def __init__(self, evaluator, tau: float = 1.0,
                 judge: Optional[NaiveScoreJudge] = None,
                 pass_value: float = 0.995,
                 search: Optional[SearchConfig] = None,
                 trigger_pass_only: bool = False,
                 leak: float = 1e-6):
        self.evaluator = evaluator
        self.tau = tau
        self.judge = judge
        self.pass_value = pass_value
        self.search = search
        self.trigger_pass_only = trigger_pass_only
        self.leak = leak

    def value_estimate(self, state: GameState) -> float:
        """Win probability for the side to move (judge or value head)."""
        if self.judge is not None:
            return self.judge.winprob(state, state.to_move)
        return (1.0 + self.evaluator(state).value) / 2.0

    def _policy_dist(self, state, rng):
        size = state.size
        if self.search is not None and self.search.playouts > 0:
            tree = run_search(state, self.evaluator, self.search, rng)
            return visit_distribution(tree, self.search.tau)
        from .search import masked_policy
        legal = state.legal_moves()
        res = self.evaluator(state)
        mass, _ = masked_policy(res.policy, legal, size)
        if self.tau != 1.0:
            if self.tau == 0.0:
                mass = (mass == mass.max()).astype(float)
            else:
                mass = mass ** (1.0 / self.tau)
            mass = mass / mass.sum()
        dist = np.zeros(size * size + 1)
        for v, m in zip(legal, mass):
            dist[_flat(v, size)] = m
        return dist

    def move_distribution(self, state, rng):
        dist = self._policy_dist(state, rng)
        info = {"value": self.value_estimate(state)}
        if self.trigger_pass_only:
            pass_idx = _pass_slot(state.size)
            if dist[pass_idx] < 1.0:
                dist = dist.copy()
                dist[pass_idx] = 0.0
                total = dist.sum()
                if total > 0.0:
                    dist = dist / total
                else:
                    dist[pass_idx] = 1.0
        if self.judge is not None and info["value"] > self.pass_value:
            pass_dist = _one_hot(PASS, state.size)
            dist = (1.0 - self.leak) * pass_dist + self.leak * dist
            dist = dist / dist.sum()
            info["premature_pass_trigger"] = True
        return dist, info


class HardenedAgent(Agent):
    """Pass-hardening wrapper: the inner agent may pass only when its only
    legal moves lie inside its own pass-alive territory."""

    def __init__(self, inner: Agent):
        self.inner = inner
        self.name = f"hardened:{inner.name}"

    def start_game(self, rules, color):
        self.inner.start_game(rules, color)

    def move_distribution(self, state, rng):
        dist, info = self.inner.move_distribution(state, rng)
        return pass_hardened_filter(state, dist), info


def make_agent(descriptor: str, rules: Rules,
               for_color: int | None = None) -> Agent:
    """Build an agent from a descriptor string (see module docstring)."""
    from . import net as netmod
    desc = descriptor.strip()
    if desc.startswith("hardened:"):
        return HardenedAgent(make_agent(desc[len("hardened:"):], rules,
                                        for_color))
    kind, _, rest = desc.partition(":")
    opts: dict[str, str] = {}
    if rest:
        for part in rest.split(","):
            key, _, val = part.partition("=")
            opts[key.strip()] = val.strip()
    kind = kind.strip().lower()
    if kind == "random":
        return RandomAgent()
    if kind == "edge":
        return EdgeAgent()
    if kind == "spiral":
        return SpiralAgent()
    if kind == "mirror":
        return MirrorAgent()
    if kind == "alwayspass":
        return AlwaysPassAgent()
    if kind == "connector":
        from .fixtures import ConnectorAgent
        return ConnectorAgent()
    if kind == "gapfill":
        from .fixtures import GapFillAgent
        return GapFillAgent()
    if kind == "net":
        evaluator = netmod.NetEvaluator(netmod.load(opts["path"]))
        cfg = SearchConfig(playouts=int(opts.get("visits", 64)),
                           tau=float(opts.get("tau", 0.0)),
                           symmetry_average=bool(int(opts.get("sym", 0))))
        agent = SearchAgent(evaluator, cfg)
        agent.name = desc
        return agent
    if kind == "adversary":
        evaluator = netmod.NetEvaluator(netmod.load(opts["path"]))
        victim_eval = netmod.NetEvaluator(netmod.load(opts["victim"]))
        mode = opts.get("mode", "S")
        victim = VictimHandle(evaluator=victim_eval,
                              symmetry_average=(mode == "SPP"))
        cfg = AdversarySearchConfig(
            mode=mode,
            search=SearchConfig(playouts=int(opts.get("visits", 48)),
                                tau=float(opts.get("tau", 0.0))),
            victim_visits=int(opts.get("victim_visits", 4)))
        agent = AdversaryAgent(evaluator, victim, cfg)
        agent.name = desc
        return agent
    if kind == "victim":
        evaluator = netmod.NetEvaluator(netmod.load(opts["path"]))
        judge = None
        if "pass_value" in opts or int(opts.get("judged_search", 0)):
            judge = NaiveScoreJudge(float(opts.get("judge_temp", 2.0)),
                                    int(opts.get("dead_libs", 3)))
        if judge is not None and int(opts.get("judged_search", 0)):
            evaluator = JudgedEvaluator(
                evaluator, judge,
                belief_weight=float(opts.get("belief_weight", 0.5)))
        visits = int(opts.get("visits", 0))
        search = SearchConfig(playouts=visits,
                              tau=float(opts.get("search_tau", 0.3))) \
            if visits else None
        agent = PolicyVictim(evaluator, tau=float(opts.get("tau", 1.0)),
                             judge=judge,
                             pass_value=float(opts.get("pass_value", 0.995)),
                             search=search,
                             trigger_pass_only=bool(
                                 int(opts.get("trigger_only", 0))))
        agent.name = desc
        return agent
    raise ValueError(f"unknown agent descriptor {descriptor!r}")
