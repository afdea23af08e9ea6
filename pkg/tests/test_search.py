"""Tree search tests: playout rule, FPU, statistics, move selection."""

import numpy as np
import pytest

from advgo.board import (BLACK, PASS, WHITE, Rules, new_game,
                         score_tromp_taylor, vertex)
from advgo.search import (EvalResult, NoSearchChildrenError, SearchConfig,
                          SearchNode, SELF, choose_move, run_search,
                          select_child_index, visit_distribution)

from oracles import minimax_best_moves


def uniform_eval(state):
    size = state.size
    p = np.zeros(size * size + 1)
    for v in state.legal_moves():
        p[size * size if v == PASS else v] = 1.0
    return EvalResult(value=0.0, policy=p / p.sum())


def make_eval(policy_map, value=0.0):
    """Evaluator with fixed flat-index priors (uniform elsewhere zero)."""

    def evaluator(state):
        size = state.size
        p = np.zeros(size * size + 1)
        for flat, mass in policy_map.items():
            p[flat] = mass
        return EvalResult(value=value, policy=p)

    return evaluator


def recompute_sums(node):
    """Full from-scratch recomputation of subtree size and value sum."""
    if node.terminal:
        return node.S, node.S * node.terminal_value
    total_s, total_w = 1, node.own_value
    for child in node.children.values():
        s, w = recompute_sums(child)
        total_s += s
        total_w += w
    return total_s, total_w


class TestRunSearch:
    def test_zero_playouts_root_only(self):
        state = new_game(Rules(board_size=3))
        tree = run_search(state, uniform_eval, SearchConfig(playouts=0),
                          np.random.default_rng(0))
        assert tree.node_count() == 1
        with pytest.raises(NoSearchChildrenError):
            choose_move(tree, 0.0)

    def test_node_count_always_n_plus_one(self):
        state = new_game(Rules(board_size=3, komi=0.0))
        for n in (1, 7, 40, 150):
            tree = run_search(state, uniform_eval, SearchConfig(playouts=n),
                              np.random.default_rng(1))
            assert tree.node_count() == n + 1
            s, _ = recompute_sums(tree.root)
            assert s == n + 1

    def test_single_playout_expands_highest_prior(self):
        # priors {A: 0.9, B: 0.1}, constant value 0, alpha=1, beta=0: all
        # scores tie at 0, so the larger prior breaks the tie.
        state = new_game(Rules(board_size=3))
        evaluator = make_eval({0: 0.9, 1: 0.1})
        tree = run_search(state, evaluator,
                          SearchConfig(playouts=1, alpha=1.0, beta=0.0),
                          np.random.default_rng(0))
        assert tree.node_count() == 2
        (idx,) = tree.root.children
        assert tree.root.legal[idx] == 0
        assert tree.root.S == 2

    def test_capture_race_found(self):
        # Black wins the race by filling the right liberties; the winning
        # first move comes from the exhaustive solver.
        state = new_game(Rules(board_size=3, komi=0.0))
        setup = [vertex(0, 2, 3), vertex(0, 0, 3), vertex(1, 1, 3),
                 vertex(1, 0, 3)]
        for v in setup:
            state = state.play(v)
        state = GameStateWithLimit(state, extra=6)
        value, best = minimax_best_moves(state)
        assert value == 1.0, "constructed race must be a black win"
        hits = 0
        for seed in range(100):
            tree = run_search(state, uniform_eval,
                              SearchConfig(playouts=200, alpha=1.0,
                                           beta=0.0, tau=0.0),
                              np.random.default_rng(seed))
            move, _ = choose_move(tree, 0.0)
            hits += move in best
        assert hits >= 95

    def test_deterministic_given_seed(self):
        state = new_game(Rules(board_size=5))
        cfg = SearchConfig(playouts=60, tau=1.0)
        t1 = run_search(state, uniform_eval, cfg, np.random.default_rng(5))
        t2 = run_search(state, uniform_eval, cfg, np.random.default_rng(5))
        assert np.array_equal(t1.root.child_S, t2.root.child_S)
        assert np.array_equal(t1.root.child_W, t2.root.child_W)
        m1, d1 = choose_move(t1, 1.0, np.random.default_rng(9))
        m2, d2 = choose_move(t2, 1.0, np.random.default_rng(9))
        assert m1 == m2 and np.array_equal(d1, d2)


def GameStateWithLimit(state, extra):
    """Copy of a state whose rules cut the game off `extra` plies later."""
    rules = Rules(board_size=state.rules.board_size, komi=state.rules.komi,
                  suicide_allowed=state.rules.suicide_allowed,
                  turn_limit=len(state.move_history) + extra)
    from advgo.board import replay_moves
    return replay_moves(rules, state.move_history)


class TestSelectChild:
    def _fabricated_node(self):
        # select_child_index reads only the statistics arrays, so a node
        # with hand-set numbers is a valid probe.
        state = new_game(Rules(board_size=3))
        node = SearchNode(state, SELF, False, 0.0, [0, 1, 2],
                          np.array([0.5, 0.3, 0.2]), 1)
        node.S = 5
        node.W = 0.9
        node.child_S = np.array([2, 1, 0])
        node.child_W = np.array([0.8, -0.1, 0.0])
        return node

    def test_alpha_zero_picks_best_mean(self):
        state = new_game(Rules(board_size=3))
        node = SearchNode(state, SELF, False, 0.0, [0, 1],
                          np.array([0.5, 0.5]), 1)
        node.S = 3
        node.child_S = np.array([1, 1])
        node.child_W = np.array([0.3, 0.7])
        assert select_child_index(node, BLACK, alpha=0.0, beta=0.0) == 1
        # opponent to move picks the minimum
        assert select_child_index(node, WHITE, alpha=0.0, beta=0.0) == 0

    def test_beta_zero_unexplored_inherit_parent_mean(self):
        state = new_game(Rules(board_size=3))
        node = SearchNode(state, SELF, False, 0.5, [0, 1],
                          np.array([0.5, 0.5]), 1)
        # alpha=0, beta=0: unexplored children score the parent mean 0.5,
        # beating the explored child's 0.2.
        node.S = 2
        node.W = 0.7
        node.child_S = np.array([1, 0])
        node.child_W = np.array([0.2, 0.0])
        assert select_child_index(node, BLACK, alpha=0.0, beta=0.0) == 1

    def test_hand_computed_scores(self):
        node = self._fabricated_node()
        # parent mean 0.18; root side fpu = 0.18 - 0.5*sqrt(0.8) = -0.267214;
        # sqrt(S-1) = 2
        # c0: 0.4      + 1*0.5*2/3 = 0.7333333...
        # c1: -0.1     + 1*0.3*2/2 = 0.2
        # c2: -0.26721 + 1*0.2*2/1 = 0.1327864...   -> argmax c0
        assert select_child_index(node, BLACK, alpha=1.0, beta=0.5) == 0
        # opponent side flips both corrections: fpu = 0.18 + 0.5*sqrt(0.8)
        # c0: 0.4     - 0.3333333 = 0.0666667
        # c1: -0.1    - 0.3       = -0.4
        # c2: 0.62721 - 0.4       = 0.2272136      -> argmin c1
        assert select_child_index(node, WHITE, alpha=1.0, beta=0.5) == 1


class TestBackup:
    def test_single_playout_root_size_two(self):
        state = new_game(Rules(board_size=3))
        tree = run_search(state, uniform_eval, SearchConfig(playouts=1),
                          np.random.default_rng(0))
        assert tree.root.S == 2

    def test_incremental_equals_recompute(self):
        state = new_game(Rules(board_size=3, komi=0.0))
        tree = run_search(state, uniform_eval,
                          SearchConfig(playouts=120, alpha=1.2, beta=0.4),
                          np.random.default_rng(2))

        def check(node):
            s, w = recompute_sums(node)
            assert s == node.S
            assert abs(w - node.W) < 1e-9
            for child in node.children.values():
                check(child)

        check(tree.root)

    def test_terminal_leaf_carries_game_result(self):
        # Force the double-pass line: pass-heavy priors reach terminals.
        state = new_game(Rules(board_size=3, komi=0.0)).play(vertex(1, 1, 3))
        state = state.play(PASS)  # white passed; black to move, ahead
        evaluator = make_eval({9: 1.0})  # pass-only policy
        tree = run_search(state, evaluator,
                          SearchConfig(playouts=10, alpha=1.0, beta=0.0),
                          np.random.default_rng(0))
        pass_idx = tree.root.legal.index(PASS)
        child = tree.root.children[pass_idx]
        assert child.terminal
        assert child.terminal_value == 1.0  # black wins the scored position
        assert child.mean_value == 1.0

    def test_values_inside_convex_hull(self):
        state = new_game(Rules(board_size=3, komi=0.0))
        tree = run_search(state, uniform_eval,
                          SearchConfig(playouts=200, alpha=1.5, beta=0.3),
                          np.random.default_rng(3))

        def walk(node):
            assert -1.0 - 1e-12 <= node.mean_value <= 1.0 + 1e-12
            for child in node.children.values():
                walk(child)

        walk(tree.root)


class TestChooseMove:
    def _tree_with_counts(self, counts, priors=None):
        state = new_game(Rules(board_size=3))
        tree = run_search(state, uniform_eval, SearchConfig(playouts=0),
                          np.random.default_rng(0))
        root = tree.root
        n = len(counts)
        root.child_S[:n] = counts
        root.child_SA[:n] = counts
        if priors is not None:
            root.priors = np.asarray(priors, dtype=float)
        return tree

    def test_tau_one_proportional(self):
        tree = self._tree_with_counts([3, 1])
        dist = visit_distribution(tree, 1.0)
        assert dist[0] == pytest.approx(0.75)
        assert dist[1] == pytest.approx(0.25)

    def test_tau_zero_argmax(self):
        tree = self._tree_with_counts([5, 5, 7])
        move, dist = choose_move(tree, 0.0)
        assert move == tree.root.legal[2]
        assert dist[2] == 1.0

    def test_tau_half_squares_counts(self):
        tree = self._tree_with_counts([4, 1])
        dist = visit_distribution(tree, 0.5)
        assert dist[0] == pytest.approx(16.0 / 17.0)
        assert dist[1] == pytest.approx(1.0 / 17.0)

    def test_tau_zero_tie_break_prefers_prior(self):
        tree = self._tree_with_counts([4, 4, 1], priors=[0.2, 0.5, 0.3])
        move, _ = choose_move(tree, 0.0)
        assert move == tree.root.legal[1]


class TestMinimaxEquivalence:
    def test_two_ply_solved_position(self):
        # Simple final-capture position, game cut two plies out. Komi 0.5
        # rules out draws: with alpha=0 a drawn line would tie the
        # first-play-urgency value forever and pin the walk.
        state = new_game(Rules(board_size=3, komi=0.5))
        for v in [vertex(0, 1, 3), vertex(0, 0, 3), vertex(1, 1, 3),
                  vertex(2, 2, 3)]:
            state = state.play(v)
        state = GameStateWithLimit(state, extra=2)
        value, best = minimax_best_moves(state)
        tree = run_search(state, uniform_eval,
                          SearchConfig(playouts=100, alpha=0.0, beta=0.0,
                                       tau=0.0),
                          np.random.default_rng(0))
        move, _ = choose_move(tree, 0.0)
        assert move in best


class TestSymmetryAveraging:
    def test_symmetric_position_symmetric_policy(self):
        from advgo.net import Network, NetEvaluator
        from advgo.symmetry import SYMMETRY_COUNT, transform_policy
        net = Network(5, channels=8, blocks=1, seed=4)
        # randomize head weights so the raw policy is asymmetric
        rng = np.random.default_rng(0)
        for k in ("pol_dw", "pol_db"):
            net.params[k] = rng.normal(0, 0.5, net.params[k].shape)
        evaluator = NetEvaluator(net)
        state = new_game(Rules(board_size=5))  # empty board: fully symmetric
        raw = evaluator(state).policy
        averaged = evaluator.eval_symmetry_averaged(state).policy
        assert not all(
            np.allclose(raw, transform_policy(raw, 5, k), atol=1e-6)
            for k in range(SYMMETRY_COUNT))
        for k in range(SYMMETRY_COUNT):
            assert np.allclose(averaged, transform_policy(averaged, 5, k),
                               atol=1e-6)

    def test_search_with_symmetry_average_flag(self):
        from advgo.net import Network, NetEvaluator
        net = Network(3, channels=4, blocks=1, seed=5)
        evaluator = NetEvaluator(net)
        state = new_game(Rules(board_size=3))
        cfg = SearchConfig(playouts=10, symmetry_average=True)
        tree = run_search(state, evaluator, cfg, np.random.default_rng(0))
        assert tree.node_count() == 11


class TestDebugDump:
    def test_dump_shows_statistics(self):
        state = new_game(Rules(board_size=3, komi=0.5))
        tree = run_search(state, uniform_eval, SearchConfig(playouts=20),
                          np.random.default_rng(0))
        text = tree.dump(max_depth=2)
        lines = text.splitlines()
        assert lines[0].startswith("root ")
        assert "S=21" in lines[0]
        assert all(("S=" in ln and "V=" in ln and "prior=" in ln)
                   for ln in lines)

    def test_root_noise_perturbs_priors_deterministically(self):
        state = new_game(Rules(board_size=3))
        cfg = SearchConfig(playouts=0, root_noise=True)
        t1 = run_search(state, uniform_eval, cfg, np.random.default_rng(4))
        t2 = run_search(state, uniform_eval, cfg, np.random.default_rng(4))
        t3 = run_search(state, uniform_eval, SearchConfig(playouts=0),
                        np.random.default_rng(4))
        assert np.array_equal(t1.root.priors, t2.root.priors)
        assert not np.array_equal(t1.root.priors, t3.root.priors)
        assert t1.root.priors.sum() == pytest.approx(1.0)
