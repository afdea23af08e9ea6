"""Command line entry points.

Subcommands: score, benson, selfplay, attack-train, eval, elo, gtp,
analyze. Exit code 0 only on full success.
"""

from __future__ import annotations

import argparse
import sys

from .board import BLACK, WHITE, Rules, score_tromp_taylor


def _cmd_score(args) -> int:
    from .sgf import from_sgf
    state = from_sgf(open(args.sgf).read())
    score = score_tromp_taylor(state)
    print(state.diagram())
    print(f"black {score.black_points:g} white {score.white_points:g} "
          f"(komi {state.rules.komi:g}) -> {score.formatted()}")
    return 0


def _cmd_benson(args) -> int:
    from .benson import analyze
    from .sgf import from_sgf
    state = from_sgf(open(args.sgf).read())
    info = analyze(state.grid, state.size)
    size = state.size
    for color, label, mark in ((BLACK, "black", "X"), (WHITE, "white", "O")):
        alive = set()
        for group in info.pass_alive[color]:
            alive |= group
        terr = info.territory[color]
        rows = []
        for r in range(size):
            rows.append(" ".join(
                mark if r * size + c in alive
                else "t" if r * size + c in terr else "."
                for c in range(size)))
        print(f"{label}: {len(info.pass_alive[color])} pass-alive chains, "
              f"{len(terr)} territory points")
        print("\n".join(rows))
    return 0


def _cmd_selfplay(args) -> int:
    from .config import load_selfplay_config
    from .training import SelfPlayConfig, train_victim_ladder
    if args.config:
        cfg = load_selfplay_config(args.config)
    else:
        cfg = SelfPlayConfig(board_size=args.board_size, seed=args.seed,
                             rounds=args.rounds, out_dir=args.out)
    paths = train_victim_ladder(cfg)
    for p in paths:
        print(p)
    return 0


def _cmd_attack_train(args) -> int:
    from .config import load_attack_config
    from .training import CurriculumStalledError, attack_train
    cfg = load_attack_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    try:
        result = attack_train(cfg)
    except CurriculumStalledError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in result.metrics_lines:
        print(line)
    print(f"best={result.best_checkpoint} final={result.final_checkpoint}")
    return 0


def _cmd_eval(args) -> int:
    from .agents import make_agent
    from .arena import play_match
    rules = Rules(board_size=args.board_size, komi=args.komi)
    a = make_agent(args.agent_a, rules)
    b = make_agent(args.agent_b, rules)
    stats, _ = play_match(a, b, args.games, rules, args.seed,
                          sgf_dir=args.sgf_dir)
    print(f"A={args.agent_a}")
    print(f"B={args.agent_b}")
    print(stats.summary_line())
    return 0 if stats.errors == 0 else 3


def _cmd_elo(args) -> int:
    from .stats import DisconnectedResultsError, elo_fit
    results = []
    names: dict[str, int] = {}

    def idx(name: str) -> int:
        return names.setdefault(name, len(names))

    for lineno, raw in enumerate(open(args.results), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            print(f"error: line {lineno}: expected "
                  f"'<a> <b> <wins_ab> <wins_ba> <draws>'", file=sys.stderr)
            return 2
        a, b, wab, wba, d = parts
        results.append((idx(a), idx(b), float(wab), float(wba), float(d)))
    try:
        table = elo_fit(results, n_agents=len(names),
                        prior_sigma=None if args.flat_prior else args.sigma)
    except DisconnectedResultsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    order = sorted(names, key=lambda n: -table.ratings[names[n]])
    for name in order:
        i = names[name]
        print(f"{name:30s} {table.ratings[i]:8.1f} "
              f"+/- {table.standard_errors[i]:6.1f}")
    return 0


def _cmd_gtp(args) -> int:
    from .agents import make_agent
    from .gtp import serve
    rules = Rules(board_size=args.board_size, komi=args.komi)
    agent = make_agent(args.agent, rules)
    serve(agent, rules, seed=args.seed)
    return 0


def _cmd_analyze(args) -> int:
    from .agents import make_agent, PolicyVictim, HardenedAgent
    from .arena import analyze_game
    from .sgf import parse_sgf
    from .training import GameRecord
    rules, moves, _ = parse_sgf(open(args.sgf).read())
    state_rules = Rules(board_size=rules.board_size, komi=rules.komi)
    agent = make_agent(args.victim, state_rules)
    inner = agent.inner if isinstance(agent, HardenedAgent) else agent
    if not isinstance(inner, PolicyVictim):
        print("error: --victim must resolve to a victim agent",
              file=sys.stderr)
        return 2
    from .board import new_game
    record = GameRecord(rules=state_rules, moves=moves,
                        adversary_color=BLACK, victim_id=args.victim,
                        score=score_tromp_taylor(
                            _replay(state_rules, moves)))
    trace = analyze_game(record, inner.value_estimate, args.threshold)
    flags = 0
    for pt in trace:
        mark = ""
        if pt.flagged:
            mark = "  <- overconfident and losing"
            flags += 1
        print(f"move {pt.move_index:3d} to_move="
              f"{'B' if pt.to_move == BLACK else 'W'} "
              f"winprob={pt.win_probability:.4f}{mark}")
    print(f"flagged {flags} positions")
    return 0


def _replay(rules, moves):
    from .board import new_game
    state = new_game(rules)
    for _, v in moves:
        state = state.play(v)
    return state


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="advgo",
        description="Adversarial-attack laboratory for Go-playing agents.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="Tromp-Taylor score of an SGF's final "
                                     "position")
    p.add_argument("sgf")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("benson", help="pass-alive chains and territory of an "
                                      "SGF's final position")
    p.add_argument("sgf")
    p.set_defaults(func=_cmd_benson)

    p = sub.add_parser("selfplay", help="train a victim checkpoint ladder by "
                                        "self-play")
    p.add_argument("--config", default=None)
    p.add_argument("--board-size", type=int, default=7)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--out", default="victims")
    p.set_defaults(func=_cmd_selfplay)

    p = sub.add_parser("attack-train", help="train an adversary against "
                                            "frozen victims")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_attack_train)

    p = sub.add_parser("eval", help="run a match between two agent "
                                    "descriptors")
    p.add_argument("agent_a")
    p.add_argument("agent_b")
    p.add_argument("-n", "--games", type=int, default=100)
    p.add_argument("--board-size", type=int, default=7)
    p.add_argument("--komi", type=float, default=7.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sgf-dir", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("elo", help="fit Elo ratings from a results file")
    p.add_argument("results")
    p.add_argument("--sigma", type=float, default=350.0)
    p.add_argument("--flat-prior", action="store_true")
    p.set_defaults(func=_cmd_elo)

    p = sub.add_parser("gtp", help="serve an agent over the Go Text Protocol")
    p.add_argument("--agent", default="random")
    p.add_argument("--board-size", type=int, default=9)
    p.add_argument("--komi", type=float, default=7.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gtp)

    p = sub.add_parser("analyze", help="victim value trace over a recorded "
                                       "game")
    p.add_argument("sgf")
    p.add_argument("--victim", required=True)
    p.add_argument("--threshold", type=float, default=0.995)
    p.set_defaults(func=_cmd_analyze)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
