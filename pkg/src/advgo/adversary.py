"""Tree search that models a fixed opponent instead of assuming self-play.

The searcher ("adversary") controls only its own turns. At opponent
("victim") nodes the walk does not use the UCB rule: it samples the victim's
actual policy network (mode ``S``), its symmetry-averaged policy (``SPP``),
or plays the move a full victim search would pick (``R``). Because sampled
victim nodes carry no useful value signal of their own, the statistics used
at the adversary's decision nodes are weighted: every node contributes its
evaluator value with weight 1 except non-terminal victim nodes, which weigh
0. The final move distribution is proportional to the weighted subtree sizes
of the root children raised to 1/tau.

The victim is gray-box throughout: only evaluator outputs are read, never
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .board import PASS, GameState
from .search import (SELF, VICTIM, Evaluator, SearchConfig, SearchError,
                     SearchNode, SearchTree, _backup, _tie_break,
                     choose_move, make_node, run_search, visit_distribution)

MODES = ("S", "SPP", "R")


@dataclass
class VictimHandle:
    """Query-only access to the victim: an evaluator plus how it searches.

    `search` carries the victim's own search settings when it plays with
    search (also used by mode R's inner searches); `symmetry_average`
    makes mode SPP average the victim policy over board symmetries.
    """

    evaluator: Evaluator
    search: Optional[SearchConfig] = None
    symmetry_average: bool = False
    victim_id: str = "victim"


@dataclass
class AdversarySearchConfig:
    mode: str = "S"
    search: SearchConfig = field(default_factory=SearchConfig)
    victim_visits: int = 1  # inner search budget, mode R only

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "R" and self.victim_visits < 1:
            raise ValueError("victim_visits must be >= 1 in mode R")


def node_weight(node: SearchNode) -> int:
    """1 for self and terminal nodes, 0 for non-terminal victim nodes."""
    if node.terminal or node.kind == SELF:
        return 1
    return 0


@dataclass
class AdversarySearchResult:
    move: int
    distribution: np.ndarray        # weighted visits ** (1/tau), sampled from
    target_distribution: np.ndarray  # weighted visits at tau=1 (policy target)
    tree: SearchTree
    forward_passes: int


def _eval_key(state: GameState):
    # Everything an evaluation can depend on: the position (hash covers the
    # grid), side to move, pass count, last move, and the legality mask
    # (which can differ between transpositions through ko history).
    return (state.hash, state.to_move, state.consecutive_passes,
            state.last_move(), tuple(state.legal_moves()))


class _MemoEvaluator:
    """Per-search victim evaluation memo.

    Purely an optimization: repeated queries of one position within a single
    search reuse the cached result instead of a fresh forward pass. The key
    covers every input an evaluation can depend on, so results are
    indistinguishable from the memo-free evaluator.
    """

    def __init__(self, evaluator: Evaluator):
        self.evaluator = evaluator
        self.memo: dict = {}
        self.sym_memo: dict = {}

    def __call__(self, state: GameState):
        key = _eval_key(state)
        res = self.memo.get(key)
        if res is None:
            res = self.evaluator(state)
            self.memo[key] = res
        return res

    def eval_symmetry_averaged(self, state: GameState):
        key = _eval_key(state)
        res = self.sym_memo.get(key)
        if res is None:
            from .net import symmetry_averaged_eval
            res = symmetry_averaged_eval(self.evaluator, state)
            self.sym_memo[key] = res
        return res


class _Context:
    """Per-search scratch: evaluators, memo tables and derived rng."""

    def __init__(self, tree, adversary_eval, victim, config, rng):
        self.tree = tree
        self.adversary_eval = adversary_eval
        self.victim = victim
        self.victim_eval = _MemoEvaluator(victim.evaluator)
        self.config = config
        self.rng = rng
        self.inner_seed = int(rng.integers(0, 2**63))


def victim_policy_at(ctx: _Context, node: SearchNode) -> np.ndarray:
    """Victim move distribution over node.legal.

    Victim nodes are evaluated with the victim network as they are added to
    the tree, so their priors already hold the masked (and in mode SPP
    symmetry-averaged) victim policy. An all-zero policy on the legal moves
    fell back to uniform at evaluation time and is noted on the tree log.
    """
    if node.victim_policy is None:
        node.victim_policy = node.priors
        if node.policy_fallback:
            ctx.tree.log_notes.append(
                f"victim policy empty on legal moves at move "
                f"{len(node.state.move_history)}; uniform fallback")
    return node.victim_policy


def victim_walk(ctx: _Context, node: SearchNode) -> int:
    """Choose the victim's child at a victim node; returns a legal index."""
    if ctx.config.mode == "R":
        if node.victim_move_index is None:
            move = _victim_full_search_move(ctx, node.state)
            node.victim_move_index = node.legal.index(move)
        return node.victim_move_index
    dist = victim_policy_at(ctx, node)
    return int(ctx.rng.choice(len(dist), p=dist))


def _victim_full_search_move(ctx: _Context, state: GameState) -> int:
    """Mode R: the move a full victim search plays at this position."""
    base = ctx.victim.search or SearchConfig()
    cfg = SearchConfig(playouts=ctx.config.victim_visits, alpha=base.alpha,
                       beta=base.beta, tau=0.0,
                       symmetry_average=base.symmetry_average)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        entropy=ctx.inner_seed, spawn_key=(state.hash % 2**32,))))
    tree = run_search(state, ctx.victim_eval, cfg, rng)
    ctx.tree.evaluations += tree.evaluations
    move, _ = choose_move(tree, 0.0)
    return move


def adversary_select(node: SearchNode, alpha: float, beta: float,
                     root_color: int | None = None) -> int:
    """Weighted UCB over the children of a self node.

    Missing children score with the first-play-urgency value derived from
    the parent's plain mean; terminal children score their game result;
    children whose weighted subtree is empty fall back to their own raw
    evaluation. In a normal search every self node is the searching
    player's turn, so the rule is the plain argmax; when both colors are
    declared self (the degenerate all-self-node reduction) nodes where the
    opponent of the root moves select by argmin, exactly as in the plain
    algorithm.
    """
    if node.kind != SELF:
        raise SearchError("adversary_select called on a victim node")
    root_side = root_color is None or node.to_move == root_color
    parent_mean = node.mean_value
    explored = node.child_S > 0
    shift = beta * np.sqrt(float(node.priors[explored].sum()))
    fpu = parent_mean - shift if root_side else parent_mean + shift
    vbar = np.full(len(node.legal), fpu)
    for idx, child in node.children.items():
        if child.terminal:
            vbar[idx] = child.terminal_value
        elif child.SA > 0:
            vbar[idx] = child.WA / child.SA
        else:
            vbar[idx] = child.own_value  # weight-0 subtree fallback
    sa = np.sqrt(max(node.SA - 1, 0))
    u = alpha * node.priors * (sa / (1.0 + node.child_SA))
    score = vbar + u if root_side else vbar - u
    best = score.max() if root_side else score.min()
    return _tie_break(np.flatnonzero(score == best), node.priors)


def _node_kind(state: GameState, self_colors: tuple[int, ...]) -> int:
    return SELF if state.to_move in self_colors else VICTIM


def _expand(ctx: _Context, parent: SearchNode, idx: int,
            self_colors: tuple[int, ...],
            path: list[tuple[SearchNode, int]]):
    state = parent.state.play(parent.legal[idx])
    kind = _node_kind(state, self_colors)
    if kind == SELF or state.is_terminal():
        evaluator = ctx.adversary_eval
        sym = ctx.config.search.symmetry_average
    else:
        # Victim leaves are valued by the victim's own network; the value
        # feeds only the plain statistics (their weight is zero).
        evaluator = ctx.victim_eval
        sym = ctx.config.mode == "SPP" or ctx.victim.symmetry_average
    leaf = make_node(state, kind, ctx.tree.root_color, evaluator, ctx.tree,
                     symmetry_average=sym)
    parent.children[idx] = leaf
    value = leaf.terminal_value if leaf.terminal else leaf.own_value
    weight = node_weight(leaf)
    for node, i in path:
        node.S += 1
        node.W += value
        node.SA += weight
        node.WA += weight * value
        node.child_S[i] += 1
        node.child_W[i] += value
        node.child_SA[i] += weight
        node.child_WA[i] += weight * value


def _playout(ctx: _Context, self_colors: tuple[int, ...]):
    cfg = ctx.config.search
    node = ctx.tree.root
    path: list[tuple[SearchNode, int]] = []
    while True:
        if node.kind == SELF:
            idx = adversary_select(node, cfg.alpha, cfg.beta,
                                   ctx.tree.root_color)
        else:
            idx = victim_walk(ctx, node)
        path.append((node, idx))
        child = node.children.get(idx)
        if child is None:
            _expand(ctx, node, idx, self_colors, path)
            return
        if child.terminal:
            _backup(path, child, child.terminal_value, 1)
            return
        node = child


def run_adversary_search(state: GameState, adversary_eval: Evaluator,
                         victim: VictimHandle, config: AdversarySearchConfig,
                         rng: np.random.Generator,
                         self_colors: tuple[int, ...] | None = None
                         ) -> AdversarySearchResult:
    """Search the adversary's move at a position where it is to move.

    `self_colors` defaults to (state.to_move,); passing both colors turns
    every node into a self node, reducing the search to the plain algorithm.
    """
    if state.is_terminal():
        raise SearchError("cannot search a terminal position")
    if self_colors is None:
        self_colors = (state.to_move,)
    if state.to_move not in self_colors:
        raise SearchError("adversary search must start at an adversary turn")
    cfg = config.search
    tree = SearchTree(root=None, root_color=state.to_move, config=cfg)  # type: ignore[arg-type]
    ctx = _Context(tree, adversary_eval, victim, config, rng)
    root = make_node(state, SELF, state.to_move, adversary_eval, tree,
                     symmetry_average=cfg.symmetry_average)
    if cfg.root_noise:
        from .search import _apply_root_noise
        root.priors = _apply_root_noise(root.priors, rng)
    tree.root = root
    for _ in range(cfg.playouts):
        _playout(ctx, self_colors)
        tree.playouts_run += 1
    dist = visit_distribution(tree, cfg.tau, weighted=True)
    target = (dist if cfg.tau == 1.0
              else visit_distribution(tree, 1.0, weighted=True))
    if cfg.tau == 0.0:
        flat = int(np.argmax(dist))
    else:
        flat = int(rng.choice(len(dist), p=dist))
    size = state.size
    move = PASS if flat == size * size else flat
    return AdversarySearchResult(move, dist, target, tree,
                                 nominal_forward_passes(config))


def nominal_forward_passes(config: AdversarySearchConfig) -> int:
    """Per-move network query accounting: one pass per playout, plus the
    victim's inner budget per playout in mode R."""
    n = config.search.playouts
    if config.mode == "R":
        return n * config.victim_visits + n
    return n


def recompute_weighted_size(node: SearchNode) -> int:
    """Sum node weights over a subtree from scratch (duplicates included)."""
    if node.terminal:
        return node.S  # each duplicate terminal visit weighs 1
    total = node_weight(node)
    for child in node.children.values():
        total += recompute_weighted_size(child)
    return total


def recompute_plain_size(node: SearchNode) -> int:
    total = node.S if node.terminal else 1
    for child in node.children.values():
        total += recompute_plain_size(child)
    return total
