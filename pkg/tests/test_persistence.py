import json

import numpy as np
import pytest

from refgame.agents import AgentDims, Vocabulary, init_agents
from refgame.errors import CheckpointError, ConfigError, ManifestError
from refgame.nn import flatten_params
from refgame.persistence import (
    Checkpoint,
    ExperimentManifest,
    load_checkpoint,
    load_eval_report,
    load_manifest,
    load_metrics_jsonl,
    load_world,
    manifest_from_dict,
    save_checkpoint,
    save_eval_report,
    save_manifest,
    save_metrics_jsonl,
    save_world,
)
from refgame.training import BaselineState, TrainConfig
from refgame.world import WorldConfig, generate_world


def make_checkpoint(arch="informed", k=6, embed=4, n_filters=3, seed=0):
    cfg = TrainConfig(arch=arch, vocab_size=k, embed_dim=embed, n_filters=n_filters,
                      n_iterations=10, seed=seed)
    sender, receiver = init_agents(
        arch, AgentDims(8, embed, n_filters), Vocabulary(k), np.random.default_rng(seed)
    )
    return Checkpoint(
        train_config=cfg,
        iteration=320,
        sender=sender,
        receiver=receiver,
        baseline=BaselineState(mean=0.75, _raw=0.007, _weight=0.01),
        rng_descriptor={"seed": seed, "games_played": 320},
    )


class TestCheckpointRoundtrip:
    @pytest.mark.parametrize("arch", ["agnostic", "informed"])
    def test_save_load_preserves_parameters(self, tmp_path, arch):
        ckpt = make_checkpoint(arch)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, ckpt)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(flatten_params(loaded.sender), flatten_params(ckpt.sender))
        np.testing.assert_array_equal(flatten_params(loaded.receiver), flatten_params(ckpt.receiver))
        assert loaded.baseline.mean == ckpt.baseline.mean
        assert loaded.iteration == 320

    def test_save_load_save_is_byte_identical(self, tmp_path):
        ckpt = make_checkpoint()
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_checkpoint(p1, ckpt)
        save_checkpoint(p2, load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file_is_a_clean_error(self, tmp_path):
        ckpt = make_checkpoint()
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, ckpt)
        path.write_text(path.read_text()[: len(path.read_text()) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unknown_schema_rejected(self, tmp_path):
        ckpt = make_checkpoint()
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, ckpt)
        doc = json.loads(path.read_text())
        doc["schema_version"] = "checkpoint/99"
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match="schema"):
            load_checkpoint(path)

    def test_vocab_mismatch_names_the_tensor(self, tmp_path):
        ckpt = make_checkpoint(k=6)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, ckpt)
        doc = json.loads(path.read_text())
        doc["train_config"]["vocab_size"] = 12  # pretend a K=12 run
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match="out.weights|sym_embed"):
            load_checkpoint(path)

    def test_corrupted_array_length(self, tmp_path):
        ckpt = make_checkpoint()
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, ckpt)
        doc = json.loads(path.read_text())
        doc["sender"]["tensors"]["embed.weights"]["data"] = [1.0, 2.0]
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match="embed.weights"):
            load_checkpoint(path)


class TestWorldFile:
    def test_roundtrip(self, tmp_path):
        world = generate_world(WorldConfig(n_categories=2, concepts_per_category=2,
                                           instances_per_concept=2, feature_dim=5, seed=5))
        path = tmp_path / "world.json"
        save_world(path, world)
        loaded = load_world(path)
        assert loaded.n_concepts == world.n_concepts
        for a, b in zip(world.instances, loaded.instances):
            np.testing.assert_array_equal(a.features, b.features)

    def test_save_is_deterministic(self, tmp_path):
        world = generate_world(WorldConfig(n_categories=2, concepts_per_category=2,
                                           instances_per_concept=2, feature_dim=5, seed=5))
        p1, p2 = tmp_path / "w1.json", tmp_path / "w2.json"
        save_world(p1, world)
        save_world(p2, world)
        assert p1.read_bytes() == p2.read_bytes()


class TestManifest:
    def minimal(self):
        return {
            "run_id": "exp1",
            "world": {"seed": 3},
            "train": {"seed": 4},
        }

    def test_minimal_manifest_gets_defaults(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(self.minimal()))
        m = load_manifest(path)
        assert m.world.n_categories == 10
        assert m.world.feature_dim == 64
        assert m.train.vocab_size == 100
        assert m.train.batch_size == 32
        assert m.train.tau == 10.0
        assert m.out_dir == "runs/exp1"

    def test_empty_file_is_parse_error(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_unknown_keys_rejected(self):
        doc = self.minimal()
        doc["train"]["learning_rate"] = 0.1  # typo for lr
        with pytest.raises(ManifestError, match="learning_rate"):
            manifest_from_dict(doc)
        doc = self.minimal()
        doc["wrold"] = {}
        with pytest.raises(ManifestError, match="wrold"):
            manifest_from_dict(doc)

    def test_invalid_values_are_named(self):
        doc = self.minimal()
        doc["train"]["tau"] = -1
        with pytest.raises(ConfigError, match="tau"):
            manifest_from_dict(doc)

    def test_roundtrip(self, tmp_path):
        m = ExperimentManifest(
            world=WorldConfig(seed=1),
            train=TrainConfig(seed=2),
            run_id="roundtrip",
            out_dir="runs/roundtrip",
        )
        path = tmp_path / "m.json"
        save_manifest(path, m)
        loaded = load_manifest(path)
        assert loaded.world == m.world
        assert loaded.train == m.train


class TestMetricsAndReports:
    def test_metrics_jsonl_roundtrip(self, tmp_path):
        metrics = [
            {"iteration": 100, "mode": "game", "train_reward_ma": 0.5,
             "eval_success": 52.0, "used_symbols": 9},
            {"iteration": 200, "mode": "game", "train_reward_ma": 0.55,
             "eval_success": 60.0, "used_symbols": 7},
        ]
        path = tmp_path / "metrics.jsonl"
        save_metrics_jsonl(path, metrics)
        assert load_metrics_jsonl(path) == metrics

    def test_eval_report_roundtrip(self, tmp_path, tiny_world):
        from refgame.agents import AgentDims, Vocabulary, init_agents
        from refgame.game import evaluate
        from refgame.nn import GibbsConfig
        from refgame.world import INSTANCE_LEVEL, make_test_set

        rng = np.random.default_rng(0)
        sender, receiver = init_agents(
            "informed", AgentDims(tiny_world.config.feature_dim), Vocabulary(5), rng
        )
        pairs = make_test_set(tiny_world, INSTANCE_LEVEL, 40, rng)
        report = evaluate(sender, receiver, pairs, GibbsConfig(10.0), rng)
        path = tmp_path / "report.json"
        save_eval_report(path, report)
        assert load_eval_report(path).to_dict() == report.to_dict()
