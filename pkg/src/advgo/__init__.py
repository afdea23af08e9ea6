"""Desk-scale laboratory for adversarial attacks on Go-playing agents.

Exact Tromp-Taylor rules, pass-alive analysis with the pass-hardening
defense, prior-weighted Monte-Carlo tree search, a victim-modelling search
family, exploit training against frozen victims, hard-coded baseline
attackers, and an evaluation arena with exact binomial intervals, Elo
fitting and a GTP server.
"""

from .board import (BLACK, DRAW, EMPTY, PASS, WHITE, GameOverError,
                    GameState, IllegalMoveError, OccupiedVertexError,
                    OffBoardError, Rules, Score, SuicideError, SuperkoError,
                    new_game, opponent, score_tromp_taylor,
                    territory_ownership)
from .benson import (analyze, pass_alive_chains, pass_alive_territory,
                     pass_hardened_filter)
from .search import (EvalResult, SearchConfig, SearchTree, choose_move,
                     run_search)
from .adversary import (AdversarySearchConfig, VictimHandle, node_weight,
                        run_adversary_search)
from .net import Network, NetEvaluator, load, save
from .training import (AttackConfig, ReplayBuffer, TrainingExample,
                       VictimSpec, attack_train, curriculum_step,
                       generate_game, train_epoch, train_victim_ladder)
from .arena import MatchStats, analyze_game, play_match
from .stats import EloTable, clopper_pearson, elo_fit

__version__ = "0.1.0"

__all__ = [
    "BLACK", "WHITE", "EMPTY", "PASS", "DRAW",
    "Rules", "GameState", "Score", "new_game", "opponent",
    "score_tromp_taylor", "territory_ownership",
    "IllegalMoveError", "OccupiedVertexError", "OffBoardError",
    "SuicideError", "SuperkoError", "GameOverError",
    "analyze", "pass_alive_chains", "pass_alive_territory",
    "pass_hardened_filter",
    "EvalResult", "SearchConfig", "SearchTree", "run_search", "choose_move",
    "AdversarySearchConfig", "VictimHandle", "node_weight",
    "run_adversary_search",
    "Network", "NetEvaluator", "save", "load",
    "AttackConfig", "ReplayBuffer", "TrainingExample", "VictimSpec",
    "attack_train", "curriculum_step", "generate_game", "train_epoch",
    "train_victim_ladder",
    "MatchStats", "play_match", "analyze_game",
    "EloTable", "clopper_pearson", "elo_fit",
    "__version__",
]
