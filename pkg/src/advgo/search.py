"""Monte-Carlo tree search with prior-weighted UCB playouts.

Each playout walks from the root picking, at nodes where the root player
moves, the child maximizing

    Vbar(c) + alpha * prior(c) * sqrt(S(x) - 1) / (1 + S(c))

and at opponent nodes the child minimizing the same expression with the
exploration term subtracted. Vbar is the running mean of leaf evaluations
over a child's subtree (root player's perspective); S is the subtree size.
Children not yet in the tree score with the first-play-urgency value: the
parent mean shifted against the side to move by beta times the square root
of the prior mass of the children already explored. The walk ends when it
steps to a missing or terminal node; that node is (re-)added as a leaf, so a
search of N playouts always grows the tree to exactly N + 1 nodes, counting
duplicated terminal visits.

The final move is drawn from a distribution proportional to S(c)**(1/tau)
over root children; tau = 0 plays the visit argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .board import PASS, GameState

SELF, VICTIM = 0, 1  # node kinds; plain search marks every node SELF


@dataclass
class EvalResult:
    """Network output for one position.

    `value` is in [-1, 1] from the perspective of the player to move;
    `policy` has length size*size + 1 (pass slot last), zero on illegal
    moves, and sums to 1.
    """

    value: float
    policy: np.ndarray
    ownership: Optional[np.ndarray] = None
    opponent_move: Optional[np.ndarray] = None


Evaluator = Callable[[GameState], EvalResult]


@dataclass
class SearchConfig:
    playouts: int = 64
    alpha: float = 1.5       # exploration/exploitation trade-off
    beta: float = 0.3        # first-play-urgency reduction
    tau: float = 1.0         # final move selection temperature; 0 = argmax
    root_noise: bool = False
    symmetry_average: bool = False

    def __post_init__(self):
        if self.playouts < 0:
            raise ValueError("playouts must be >= 0")
        if self.alpha < 0 or self.beta < 0 or self.tau < 0:
            raise ValueError("alpha, beta and tau must be >= 0")


class SearchError(Exception):
    pass


class NoSearchChildrenError(SearchError):
    """Raised when a move is requested from a childless tree (N = 0);
    callers should fall back to the raw policy."""


class SearchNode:
    __slots__ = (
        "state", "to_move", "kind", "terminal", "terminal_value", "own_value",
        "weight", "legal", "priors", "children", "child_S", "child_W",
        "child_SA", "child_WA", "S", "W", "SA", "WA", "victim_policy",
        "victim_move_index", "policy_fallback",
    )

    def __init__(self, state: GameState, kind: int, terminal: bool,
                 value: float, legal: list[int], priors: np.ndarray,
                 weight: int):
        self.state = state
        self.to_move = state.to_move
        self.kind = kind
        self.terminal = terminal
        self.terminal_value = value if terminal else 0.0
        self.own_value = value  # root perspective; for terminals the result
        self.weight = weight
        self.legal = legal
        self.priors = priors
        n = len(legal)
        self.children: dict[int, SearchNode] = {}
        self.child_S = np.zeros(n, dtype=np.int64)
        self.child_W = np.zeros(n, dtype=np.float64)
        self.child_SA = np.zeros(n, dtype=np.int64)
        self.child_WA = np.zeros(n, dtype=np.float64)
        self.S = 1
        self.W = value
        self.SA = weight
        self.WA = weight * value
        self.victim_policy: Optional[np.ndarray] = None
        self.victim_move_index: Optional[int] = None
        self.policy_fallback = False

    @property
    def mean_value(self) -> float:
        return self.W / self.S


@dataclass
class SearchTree:
    root: SearchNode
    root_color: int
    config: SearchConfig
    evaluations: int = 0
    playouts_run: int = 0
    log_notes: list[str] = field(default_factory=list)

    def node_count(self) -> int:
        return self.root.S

    def dump(self, max_depth: int = 3) -> str:
        """Indented statistics dump for hand-trace verification."""
        from .board import format_vertex
        size = self.root.state.size
        lines = []

        def walk(node: SearchNode, move_label: str, depth: int, prior: float):
            kind = "T" if node.terminal else ("S" if node.kind == SELF else "V")
            lines.append(
                f"{'  ' * depth}{move_label} kind={kind} S={node.S} "
                f"V={node.mean_value:+.4f} SA={node.SA} "
                f"VA={(node.WA / node.SA) if node.SA else float('nan'):+.4f} "
                f"prior={prior:.4f}")
            if depth >= max_depth:
                return
            order = sorted(node.children.items(),
                           key=lambda kv: -node.child_S[kv[0]])
            for idx, child in order:
                walk(child, format_vertex(node.legal[idx], size), depth + 1,
                     float(node.priors[idx]))

        walk(self.root, "root", 0, 1.0)
        return "\n".join(lines)


def masked_policy(policy: np.ndarray, legal: list[int],
                  size: int) -> tuple[np.ndarray, bool]:
    """Restrict a full policy vector to legal moves and renormalize.

    Returns (distribution, fell_back): uniform with fell_back=True when the
    legal mass is zero.
    """
    idx = [size * size if v == PASS else v for v in legal]
    mass = policy[idx]
    total = mass.sum()
    if total <= 0.0:
        return np.full(len(legal), 1.0 / len(legal)), True
    return mass / total, False


def _apply_root_noise(priors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Classic Dirichlet root mixing; disabled by default.
    noise = rng.dirichlet(np.full(len(priors), 0.3))
    return 0.75 * priors + 0.25 * noise


def _tie_break(candidates: np.ndarray, priors: np.ndarray) -> int:
    """Among tied score indices prefer the larger prior, then the first in
    row-major order (legal lists put Pass last)."""
    best_prior = priors[candidates].max()
    for i in candidates:
        if priors[i] == best_prior:
            return int(i)
    raise AssertionError("unreachable")


def select_child_index(node: SearchNode, root_color: int, alpha: float,
                       beta: float) -> int:
    """The UCB walk rule of plain search. Returns an index into node.legal."""
    root_side = node.to_move == root_color
    parent_mean = node.mean_value
    explored = node.child_S > 0
    explored_prior_mass = float(node.priors[explored].sum())
    fpu_shift = beta * np.sqrt(explored_prior_mass)
    fpu = parent_mean - fpu_shift if root_side else parent_mean + fpu_shift
    with np.errstate(invalid="ignore"):
        vbar = np.where(explored, node.child_W / np.maximum(node.child_S, 1), fpu)
    u = alpha * node.priors * (np.sqrt(node.S - 1) / (1.0 + node.child_S))
    score = vbar + u if root_side else vbar - u
    best = score.max() if root_side else score.min()
    return _tie_break(np.flatnonzero(score == best), node.priors)


def _evaluate(state: GameState, evaluator: Evaluator, tree: SearchTree,
              symmetry_average: bool) -> EvalResult:
    tree.evaluations += 1
    if not symmetry_average:
        return evaluator(state)
    from .net import symmetry_averaged_eval
    return symmetry_averaged_eval(evaluator, state)


def make_node(state: GameState, kind: int, root_color: int,
              evaluator: Evaluator, tree: SearchTree,
              symmetry_average: bool = False) -> SearchNode:
    """Evaluate a position and wrap it as a tree node (root perspective)."""
    from .board import DRAW, score_tromp_taylor
    if state.is_terminal():
        score = score_tromp_taylor(state)
        if score.winner == root_color:
            value = 1.0
        elif score.winner == DRAW:
            value = 0.0
        else:
            value = -1.0
        return SearchNode(state, kind, True, value, [], np.zeros(0), 1)
    res = _evaluate(state, evaluator, tree, symmetry_average)
    legal = state.legal_moves()
    priors, fell_back = masked_policy(res.policy, legal, state.size)
    value = res.value if state.to_move == root_color else -res.value
    weight = 1 if kind == SELF else 0
    node = SearchNode(state, kind, False, value, legal, priors, weight)
    node.policy_fallback = fell_back
    return node


def _backup(path: list[tuple[SearchNode, int]], leaf: SearchNode,
            value: float, weight: int):
    leaf.S += 1
    leaf.W += value
    leaf.SA += weight
    leaf.WA += weight * value
    for node, idx in path:
        node.S += 1
        node.W += value
        node.SA += weight
        node.WA += weight * value
        node.child_S[idx] += 1
        node.child_W[idx] += value
        node.child_SA[idx] += weight
        node.child_WA[idx] += weight * value


def _attach_leaf(tree: SearchTree, parent: SearchNode, idx: int,
                 leaf: SearchNode, path: list[tuple[SearchNode, int]]):
    """Install a freshly evaluated leaf and push its statistics up the path.

    The leaf arrives with its own statistics already initialised (S=1), so
    only ancestors are updated here.
    """
    parent.children[idx] = leaf
    value = leaf.terminal_value if leaf.terminal else leaf.own_value
    weight = 1 if (leaf.terminal or leaf.kind == SELF) else 0
    for node, i in path:
        node.S += 1
        node.W += value
        node.SA += weight
        node.WA += weight * value
        node.child_S[i] += 1
        node.child_W[i] += value
        node.child_SA[i] += weight
        node.child_WA[i] += weight * value


def _playout(tree: SearchTree, evaluator: Evaluator, config: SearchConfig):
    node = tree.root
    path: list[tuple[SearchNode, int]] = []
    while True:
        idx = select_child_index(node, tree.root_color, config.alpha,
                                 config.beta)
        path.append((node, idx))
        child = node.children.get(idx)
        if child is None:
            state = node.state.play(node.legal[idx])
            leaf = make_node(state, SELF, tree.root_color, evaluator, tree,
                             config.symmetry_average)
            _attach_leaf(tree, node, idx, leaf, path)
            return
        if child.terminal:
            # Terminal revisits add duplicate terminal nodes.
            _backup(path, child, child.terminal_value, 1)
            return
        node = child


def run_search(state: GameState, evaluator: Evaluator, config: SearchConfig,
               rng: np.random.Generator) -> SearchTree:
    """Search a non-terminal position for config.playouts playouts."""
    if state.is_terminal():
        raise SearchError("cannot search a terminal position")
    tree = SearchTree(root=None, root_color=state.to_move, config=config)  # type: ignore[arg-type]
    root = make_node(state, SELF, state.to_move, evaluator, tree,
                     config.symmetry_average)
    if config.root_noise:
        root.priors = _apply_root_noise(root.priors, rng)
    tree.root = root
    for _ in range(config.playouts):
        _playout(tree, evaluator, config)
        tree.playouts_run += 1
    return tree


def visit_distribution(tree: SearchTree, tau: float,
                       weighted: bool = False) -> np.ndarray:
    """Distribution over all moves (size*size+1) from root visit counts."""
    root = tree.root
    size = root.state.size
    counts = (root.child_SA if weighted else root.child_S).astype(np.float64)
    if weighted and counts.sum() <= 0 < root.child_S.sum():
        # Every explored child is still a weight-0 opponent leaf; fall back
        # to the plain visit counts rather than an undefined distribution.
        counts = root.child_S.astype(np.float64)
    if counts.sum() <= 0:
        raise NoSearchChildrenError(
            "tree has no visited children; fall back to the raw policy")
    dist = np.zeros(size * size + 1)
    idx = np.array([size * size if v == PASS else v for v in root.legal])
    if tau == 0.0:
        visited = np.flatnonzero(counts == counts.max())
        best = _tie_break(visited, root.priors)
        dist[idx[best]] = 1.0
        return dist
    logits = np.full(len(counts), -np.inf)
    pos = counts > 0
    logits[pos] = np.log(counts[pos]) / tau
    logits -= logits.max()
    w = np.exp(logits)
    dist[idx] = w / w.sum()
    return dist


def choose_move(tree: SearchTree, tau: float,
                rng: np.random.Generator | None = None,
                weighted: bool = False) -> tuple[int, np.ndarray]:
    """Pick the move to play from root statistics: (vertex, distribution)."""
    dist = visit_distribution(tree, tau, weighted)
    size = tree.root.state.size
    if tau == 0.0 or rng is None:
        flat = int(np.argmax(dist))
    else:
        flat = int(rng.choice(len(dist), p=dist))
    return (PASS if flat == size * size else flat), dist
