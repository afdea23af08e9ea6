"""Victim-modelling search tests: weights, walks, fallbacks, accounting."""

import numpy as np
import pytest

from advgo.adversary import (AdversarySearchConfig, SearchError, VictimHandle,
                             adversary_select, node_weight,
                             nominal_forward_passes, recompute_plain_size,
                             recompute_weighted_size, run_adversary_search)
from advgo.board import BLACK, PASS, WHITE, Rules, new_game, vertex
from advgo.search import (SELF, VICTIM, EvalResult, SearchConfig, SearchNode,
                          choose_move, run_search)


def uniform_eval(state):
    size = state.size
    p = np.zeros(size * size + 1)
    for v in state.legal_moves():
        p[size * size if v == PASS else v] = 1.0
    return EvalResult(value=0.0, policy=p / p.sum())


def pass_eval(state):
    size = state.size
    p = np.zeros(size * size + 1)
    p[size * size] = 1.0
    return EvalResult(value=0.0, policy=p)


def hashed_eval(state):
    """Deterministic pseudo-random evaluator keyed by the position hash."""
    rng = np.random.default_rng(state.hash % (2**63))
    size = state.size
    p = np.zeros(size * size + 1)
    legal = state.legal_moves()
    mass = rng.random(len(legal)) + 1e-3
    for v, m in zip(legal, mass / mass.sum()):
        p[size * size if v == PASS else v] = m
    return EvalResult(value=float(rng.uniform(-0.9, 0.9)), policy=p)


def point_mass_eval(target_flat):
    def evaluator(state):
        size = state.size
        p = np.zeros(size * size + 1)
        p[target_flat] = 1.0
        return EvalResult(value=0.0, policy=p)
    return evaluator


class TestNodeWeight:
    def _node(self, kind, terminal):
        state = new_game(Rules(board_size=3))
        node = SearchNode(state, kind, terminal, 0.0, [0], np.ones(1), 1)
        return node

    def test_self_node_weighs_one(self):
        assert node_weight(self._node(SELF, False)) == 1

    def test_terminal_victim_node_weighs_one(self):
        assert node_weight(self._node(VICTIM, True)) == 1

    def test_non_terminal_victim_node_weighs_zero(self):
        assert node_weight(self._node(VICTIM, False)) == 0


class TestVictimWalk:
    def test_point_mass_victim_deterministic_single_child(self):
        # victim policy: all mass on its first legal move, a point mass at
        # every position
        def first_legal_eval(state):
            size = state.size
            p = np.zeros(size * size + 1)
            v = state.legal_moves()[0]
            p[size * size if v == PASS else v] = 1.0
            return EvalResult(value=0.0, policy=p)

        state = new_game(Rules(board_size=3))
        victim = VictimHandle(evaluator=first_legal_eval)
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=40, tau=0))
        res = run_adversary_search(state, uniform_eval, victim, cfg,
                                   np.random.default_rng(0))

        def check(node):
            if node.kind == VICTIM and not node.terminal:
                assert len(node.children) <= 1
                for idx in node.children:
                    assert node.legal[idx] == node.state.legal_moves()[0]
            for child in node.children.values():
                check(child)

        check(res.tree.root)
        again = run_adversary_search(state, uniform_eval, victim, cfg,
                                     np.random.default_rng(99))
        # rng-independent: the whole search is deterministic
        assert again.move == res.move
        assert np.array_equal(again.distribution, res.distribution)

    def test_seeded_walks_reproducible(self):
        state = new_game(Rules(board_size=5))
        victim = VictimHandle(evaluator=hashed_eval)
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=50, tau=1.0))
        r1 = run_adversary_search(state, hashed_eval, victim, cfg,
                                  np.random.default_rng(3))
        r2 = run_adversary_search(state, hashed_eval, victim, cfg,
                                  np.random.default_rng(3))
        assert r1.move == r2.move
        assert np.array_equal(r1.distribution, r2.distribution)
        assert np.array_equal(r1.tree.root.child_SA, r2.tree.root.child_SA)

    def test_spp_mode_symmetrizes_victim_policy(self):
        from advgo.net import Network, NetEvaluator
        from advgo.symmetry import SYMMETRY_COUNT, transform_policy
        net = Network(5, channels=8, blocks=1, seed=21)
        rng = np.random.default_rng(0)
        for k in ("pol_dw", "pol_db"):
            net.params[k] = rng.normal(0, 0.5, net.params[k].shape)
        victim_eval = NetEvaluator(net)
        state = new_game(Rules(board_size=5)).play(PASS)  # victim to move
        # raw policy is asymmetric on the empty board; the SPP victim model
        # must sample from a symmetry-invariant distribution
        raw = victim_eval(state).policy
        assert not all(np.allclose(raw, transform_policy(raw, 5, k))
                       for k in range(SYMMETRY_COUNT))
        averaged = victim_eval.eval_symmetry_averaged(state).policy
        for k in range(SYMMETRY_COUNT):
            assert np.allclose(averaged, transform_policy(averaged, 5, k),
                               atol=1e-9)


class TestAdversarySelect:
    def test_rejects_victim_nodes(self):
        state = new_game(Rules(board_size=3))
        node = SearchNode(state, VICTIM, False, 0.0, [0], np.ones(1), 0)
        with pytest.raises(SearchError):
            adversary_select(node, alpha=1.0, beta=0.0)

    def test_weighted_subtree_hand_trace(self):
        # A victim-node child with one self-node grandchild: the child's
        # weighted size counts only the grandchild.
        state = new_game(Rules(board_size=3))
        victim = VictimHandle(evaluator=point_mass_eval(4))
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=2, alpha=1.0, beta=0.0,
                                          tau=0))
        res = run_adversary_search(state, point_mass_eval(0), victim, cfg,
                                   np.random.default_rng(0))
        root = res.tree.root
        (idx,) = [i for i in root.children if root.child_S[i] == 2]
        child = root.children[idx]
        assert child.kind == VICTIM and not child.terminal
        assert child.S == 2 and child.SA == 1  # itself weightless + 1 self
        (gidx,) = child.children
        grandchild = child.children[gidx]
        assert grandchild.kind == SELF
        assert grandchild.SA == 1
        assert recompute_weighted_size(child) == 1

    def test_zero_weight_subtree_falls_back_to_leaf_value(self):
        # A fresh non-terminal victim leaf has a weight-0 subtree; its
        # selection value must be its own raw evaluation.
        state = new_game(Rules(board_size=3))

        def valued_victim(st):
            res = uniform_eval(st)
            return EvalResult(value=0.6, policy=res.policy)

        victim = VictimHandle(evaluator=valued_victim)
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=1, alpha=1.0, beta=0.0,
                                          tau=0))
        res = run_adversary_search(state, uniform_eval, victim, cfg,
                                   np.random.default_rng(0))
        root = res.tree.root
        (idx,) = root.children
        leaf = root.children[idx]
        assert leaf.kind == VICTIM and leaf.SA == 0
        # victim to move: +0.6 for the victim is -0.6 in root perspective
        assert leaf.own_value == pytest.approx(-0.6)
        # plain stats carry the value, weighted stats exclude it
        assert root.child_W[idx] == pytest.approx(-0.6)
        assert root.child_WA[idx] == 0.0


class TestRunAdversarySearch:
    def test_requires_adversary_turn(self):
        state = new_game(Rules(board_size=3))
        victim = VictimHandle(evaluator=pass_eval)
        cfg = AdversarySearchConfig(mode="S",
                                    search=SearchConfig(playouts=1))
        with pytest.raises(SearchError):
            run_adversary_search(state, uniform_eval, victim, cfg,
                                 np.random.default_rng(0),
                                 self_colors=(WHITE,))

    def test_winning_pass_line_against_passing_victim(self):
        # Adversary ahead on points against an always-passing victim: the
        # double-pass terminals carry weight 1 and the pass line wins.
        state = new_game(Rules(board_size=3, komi=0.0))
        state = state.play(vertex(1, 1, 3)).play(PASS)
        victim = VictimHandle(evaluator=pass_eval)
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=40, alpha=1.0, beta=0.3,
                                          tau=0))
        res = run_adversary_search(state, uniform_eval, victim, cfg,
                                   np.random.default_rng(0))
        assert res.move == PASS
        root = res.tree.root
        pass_idx = root.legal.index(PASS)
        terminal = root.children[pass_idx]
        assert terminal.terminal and node_weight(terminal) == 1
        assert terminal.terminal_value == 1.0
        assert root.child_SA[pass_idx] == root.child_S[pass_idx]

    def test_r_mode_victim_moves_match_standalone_search(self):
        state = new_game(Rules(board_size=3, komi=0.5))
        for v in [vertex(0, 1, 3), vertex(0, 0, 3), vertex(1, 1, 3),
                  vertex(2, 2, 3)]:
            state = state.play(v)
        victim = VictimHandle(evaluator=uniform_eval,
                              search=SearchConfig(alpha=1.0, beta=0.0))
        cfg = AdversarySearchConfig(
            mode="R", search=SearchConfig(playouts=30, alpha=1.0, beta=0.0,
                                          tau=0),
            victim_visits=40)
        res = run_adversary_search(state, uniform_eval, victim, cfg,
                                   np.random.default_rng(1))

        def check(node):
            if node.kind == VICTIM and not node.terminal and node.children:
                inner = run_search(node.state, uniform_eval,
                                   SearchConfig(playouts=40, alpha=1.0,
                                                beta=0.0, tau=0.0),
                                   np.random.default_rng(0))
                best, _ = choose_move(inner, 0.0)
                assert len(node.children) == 1
                (idx,) = node.children
                assert node.legal[idx] == best
            for child in node.children.values():
                check(child)

        check(res.tree.root)

    def test_tau_zero_weighted_argmax(self):
        state = new_game(Rules(board_size=3))
        victim = VictimHandle(evaluator=uniform_eval)
        cfg = AdversarySearchConfig(mode="S",
                                    search=SearchConfig(playouts=9, tau=0))
        res = run_adversary_search(state, uniform_eval, victim, cfg,
                                   np.random.default_rng(2))
        root = res.tree.root
        counts = root.child_SA.copy()
        best = int(np.flatnonzero(counts == counts.max())[0])
        # distribution is a point mass on the weighted-visit argmax
        # (modulo the documented prior tie-break)
        flat = int(np.argmax(res.distribution))
        picked = root.legal.index(PASS if flat == 9 else flat)
        assert counts[picked] == counts[best]

    def test_forward_pass_accounting(self):
        s_cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=64))
        assert nominal_forward_passes(s_cfg) == 64
        r_cfg = AdversarySearchConfig(
            mode="R", search=SearchConfig(playouts=100), victim_visits=64)
        assert nominal_forward_passes(r_cfg) == 100 * 64 + 100


class TestInvariants:
    def _fuzz_games(self, n_games, mode="S"):
        rules = Rules(board_size=4, komi=0.5)
        for g in range(n_games):
            rng = np.random.default_rng(1000 + g)
            state = new_game(rules)
            adv_color = BLACK if g % 2 == 0 else WHITE
            victim = VictimHandle(evaluator=hashed_eval)
            cfg = AdversarySearchConfig(
                mode=mode, search=SearchConfig(playouts=12, tau=1.0),
                victim_visits=4)
            while not state.is_terminal():
                if state.to_move == adv_color:
                    res = run_adversary_search(state, hashed_eval, victim,
                                               cfg, rng)
                    yield res.tree
                    state = state.play(res.move)
                else:
                    legal = state.legal_moves()
                    state = state.play(legal[rng.integers(len(legal))])

    def test_weighted_size_recomputation_fuzz(self):
        for tree in self._fuzz_games(12):
            root = tree.root
            assert recompute_weighted_size(root) == root.SA
            assert recompute_plain_size(root) == root.S
            assert root.SA <= root.S

    def test_kinds_alternate_along_paths(self):
        for tree in self._fuzz_games(4):
            def walk(node):
                for child in node.children.values():
                    if not child.terminal:
                        assert child.kind != node.kind
                    walk(child)
            walk(tree.root)

    def test_all_self_node_tree_matches_plain_search(self):
        # With both colors declared self, selection is move-for-move
        # identical to the plain algorithm over a whole scripted game.
        rules = Rules(board_size=4, komi=0.5)
        state = new_game(rules)
        victim = VictimHandle(evaluator=pass_eval)  # never consulted
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=25, alpha=1.2, beta=0.25,
                                          tau=0))
        moves = 0
        while not state.is_terminal() and moves < 12:
            res = run_adversary_search(state, hashed_eval, victim, cfg,
                                       np.random.default_rng(moves),
                                       self_colors=(BLACK, WHITE))
            tree = run_search(state, hashed_eval, cfg.search,
                              np.random.default_rng(moves))
            plain_move, plain_dist = choose_move(tree, 0.0)
            assert res.move == plain_move
            assert np.array_equal(res.distribution, plain_dist)
            assert np.array_equal(res.tree.root.child_S, tree.root.child_S)
            state = state.play(res.move)
            moves += 1


class TestDebugDump:
    def test_dump_carries_kind_and_weighted_columns(self):
        state = new_game(Rules(board_size=3, komi=0.5))
        victim = VictimHandle(evaluator=uniform_eval)
        cfg = AdversarySearchConfig(
            mode="S", search=SearchConfig(playouts=20, tau=1.0))
        res = run_adversary_search(state, uniform_eval, victim, cfg,
                                   np.random.default_rng(0))
        text = res.tree.dump(max_depth=2)
        assert "kind=S" in text and "kind=V" in text
        assert "SA=" in text and "VA=" in text


class TestSppInLoop:
    def test_spp_search_runs_and_is_deterministic(self):
        from advgo.net import Network, NetEvaluator
        victim_eval = NetEvaluator(Network(4, channels=4, blocks=1, seed=8))
        state = new_game(Rules(board_size=4, komi=0.5))
        cfg = AdversarySearchConfig(
            mode="SPP", search=SearchConfig(playouts=10, tau=0))
        victim = VictimHandle(evaluator=victim_eval)
        r1 = run_adversary_search(state, uniform_eval, victim, cfg,
                                  np.random.default_rng(1))
        r2 = run_adversary_search(state, uniform_eval, victim, cfg,
                                  np.random.default_rng(1))
        assert r1.move == r2.move
        assert r1.tree.node_count() == 11
