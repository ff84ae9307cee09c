"""Desk-scale laboratory for emergent communication in referential games.

Two neural agents (a sender and a receiver) learn a discrete signaling
protocol from scratch by Reinforce on a synthetic concept world, with an
analysis suite (communicative success, cluster purity, usage spectrum), a
grounding-by-supervision variant, and a live human-plays-receiver server.
"""

from .agents import (
    AGNOSTIC,
    INFORMED,
    AgentDims,
    AgnosticSenderParams,
    InformedSenderParams,
    ReceiverParams,
    Vocabulary,
    init_agents,
    receiver_forward,
    receiver_logprob_grad,
    sender_forward,
    sender_logprob_grad,
)
from .analysis import (
    PurityResult,
    SymbolAssignment,
    grounding_match_rate,
    majority_symbol_map,
    permutation_chance,
    purity,
    usage_spectrum,
)
from .game import EvalReport, RoundRecord, SymbolUsageMatrix, evaluate, play_round
from .nn import DenseParams, GibbsConfig, PairConvParams, gibbs, sample_categorical, sgd_apply
from .training import BaselineState, TrainConfig, TrainResult, reinforce_batch_update, supervised_update, train
from .world import (
    CLASS_LEVEL,
    INSTANCE_LEVEL,
    Concept,
    GamePair,
    SceneInstance,
    World,
    WorldConfig,
    generate_world,
    make_test_set,
    sample_game,
)

__version__ = "0.1.0"
