import numpy as np
import pytest

from refgame.agents import (
    INFORMED,
    AgentDims,
    AgnosticSenderParams,
    ReceiverParams,
    Vocabulary,
    init_agents,
)
from refgame.errors import DomainError
from refgame.game import AGG_CONCEPT, build_usage_matrix, evaluate, play_round
from refgame.nn import DenseParams, GibbsConfig
from refgame.world import INSTANCE_LEVEL, GamePair, SceneInstance, make_test_set

G = GibbsConfig(10.0)
DIM = 4


def forced_sender(symbol: int, k: int = 4):
    """Sender whose output bias makes one symbol overwhelmingly likely."""
    out_bias = np.zeros(k)
    out_bias[symbol] = 1e4
    return AgnosticSenderParams(
        embed=DenseParams(np.zeros((2, DIM)), np.zeros(2)),
        out=DenseParams(np.zeros((k, 4)), out_bias),
    )


def forced_receiver(correct: bool = True, k: int = 4):
    """Receiver that (nearly) deterministically picks the larger-feature image.

    Paired with `bright_pair`, that is the target when `correct`, else the
    distractor.
    """
    sign = 10.0 if correct else -10.0
    return ReceiverParams(
        img_embed=DenseParams(sign * np.eye(DIM), np.zeros(DIM)),
        sym_embed=DenseParams(np.zeros((DIM, k)), np.full(DIM, 10.0)),
    )


def bright_pair(target_side="L"):
    bright = SceneInstance(0, 0, np.ones(DIM), 1)
    dark = SceneInstance(1, 1, -np.ones(DIM), 2)
    left, right = (bright, dark) if target_side == "L" else (dark, bright)
    return GamePair(left, right, target_side, left, right)


SHARP = GibbsConfig(0.01)  # makes the forced agents effectively deterministic


class TestPlayRound:
    def test_forced_receiver_always_wins(self):
        rng = np.random.default_rng(0)
        sender = forced_sender(2)
        receiver = forced_receiver(correct=True)
        for i in range(500):
            rec = play_round(sender, receiver, bright_pair("L" if i % 2 else "R"), SHARP, rng)
            assert rec.reward == 1.0

    def test_reward_is_binary_over_random_rounds(self, tiny_world):
        rng = np.random.default_rng(1)
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(6), rng
        )
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, 2000, rng)
        for pair in pairs:
            rec = play_round(sender, receiver, pair, G, rng)
            assert rec.reward in (0.0, 1.0)
            assert rec.target_hit == (rec.reward == 1.0)

    def test_untrained_agents_hover_at_chance(self, tiny_world):
        rng = np.random.default_rng(2)
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(6), rng
        )
        n = 10_000
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, n, rng)
        wins = sum(play_round(sender, receiver, p, G, rng).reward for p in pairs)
        sigma = np.sqrt(n * 0.25)
        assert abs(wins - n / 2) < 4 * sigma

    def test_receiver_presentation_independent_of_target(self, tiny_world):
        rng = np.random.default_rng(3)
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(6), rng
        )
        n = 8000
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, n, rng)
        target_first = 0
        for pair in pairs:
            rec = play_round(sender, receiver, pair, G, rng)
            slot_of_target = rec.shuffle.index(0 if pair.target_side == "L" else 1)
            target_first += slot_of_target == 0
        assert abs(target_first - n / 2) < 4 * np.sqrt(n * 0.25)

    def test_no_target_information_reaches_receiver(self):
        # With byte-identical images the receiver's distribution must be
        # exactly symmetric whatever the target side is.
        rng = np.random.default_rng(4)
        inst = SceneInstance(0, 0, np.ones(DIM), 1)
        twin = SceneInstance(1, 1, np.ones(DIM), 2)
        sender = forced_sender(1)
        receiver = forced_receiver()
        for side in ("L", "R"):
            pair = GamePair(inst, twin, side, inst, twin)
            rec = play_round(sender, receiver, pair, G, rng)
            np.testing.assert_allclose(rec.receiver_action.probs, [0.5, 0.5], rtol=1e-12)


class TestEvaluate:
    def test_all_win_agents_reach_100(self):
        rng = np.random.default_rng(5)
        pairs = [bright_pair("L" if i % 2 else "R") for i in range(40)]
        report = evaluate(forced_sender(2), forced_receiver(True), pairs, SHARP, rng)
        assert report.comm_success == 100.0
        assert report.used_symbols == 1

    def test_single_losing_round(self):
        rng = np.random.default_rng(6)
        report = evaluate(forced_sender(0), forced_receiver(False), [bright_pair()], SHARP, rng)
        assert report.comm_success == 0.0
        assert report.used_symbols == 1
        assert report.n_games == 1

    def test_hand_scripted_transcript_tally(self):
        # 4 rounds, forced symbol 2, forced winner; targets: concepts 0,1,0,0.
        rng = np.random.default_rng(7)
        pairs = [bright_pair("L"), bright_pair("R"), bright_pair("L"), bright_pair("L")]
        report = evaluate(forced_sender(2), forced_receiver(True), pairs, SHARP, rng)
        assert report.n_games == 4
        assert report.comm_success == 100.0
        # bright_pair target is always the bright instance, concept 0 on L and
        # concept 1 when target R (instances swap sides but not ids).
        assert report.per_concept_symbol_counts == {0: {2: 4}}
        total_plays = report.usage.counts.sum()
        assert total_plays == 4

    def test_usage_rows_sum_to_plays(self, tiny_world):
        rng = np.random.default_rng(8)
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(5), rng
        )
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, 300, rng)
        report, records = evaluate(sender, receiver, pairs, G, rng, keep_records=True)
        assert report.usage.counts.sum() == 300
        per_key_plays = {}
        for rec in records:
            key = (rec.pair.target.instance_id, rec.pair.distractor.instance_id)
            per_key_plays[key] = per_key_plays.get(key, 0) + 1
        for key, row in zip(report.usage.row_keys, report.usage.counts):
            assert row.sum() == per_key_plays[key]

    def test_concept_aggregation(self, tiny_world):
        rng = np.random.default_rng(9)
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(5), rng
        )
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, 200, rng)
        _, records = evaluate(sender, receiver, pairs, G, rng, keep_records=True)
        usage = build_usage_matrix(records, 5, AGG_CONCEPT)
        assert usage.counts.sum() == 200
        assert set(usage.row_keys) <= set(range(tiny_world.n_concepts))

    def test_reproducible_given_seed(self, tiny_world):
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(5),
            np.random.default_rng(10),
        )
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, 150, np.random.default_rng(11))
        a = evaluate(sender, receiver, pairs, G, np.random.default_rng(12))
        b = evaluate(sender, receiver, pairs, G, np.random.default_rng(12))
        assert a.to_dict() == b.to_dict()

    def test_empty_test_set_rejected(self):
        with pytest.raises(DomainError):
            evaluate(forced_sender(0), forced_receiver(), [], G, np.random.default_rng(0))

    def test_report_roundtrip(self, tiny_world):
        from refgame.game import EvalReport

        rng = np.random.default_rng(13)
        sender, receiver = init_agents(
            INFORMED, AgentDims(tiny_world.config.feature_dim), Vocabulary(5), rng
        )
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, 50, rng)
        report = evaluate(sender, receiver, pairs, G, rng)
        clone = EvalReport.from_dict(report.to_dict())
        assert clone.to_dict() == report.to_dict()
