"""Synthetic concept world: categorized concepts, noisy instances, game pairs.

Features stand in for CNN activations: every instance is its concept's
prototype plus per-instance Gaussian noise, where the concept prototype is a
category-level draw plus a concept-level offset. Generation is a pure
function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError

INSTANCE_LEVEL = "instance_level"
CLASS_LEVEL = "class_level"
GAME_MODES = (INSTANCE_LEVEL, CLASS_LEVEL)


@dataclass(frozen=True)
class WorldConfig:
    n_categories: int = 10
    concepts_per_category: int = 10
    instances_per_concept: int = 20
    feature_dim: int = 64
    prototype_scale: float = 1.0
    concept_offset_scale: float = 0.5
    instance_noise_scale: float = 0.1
    feature_mode: str = "raw"  # raw | normalized
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_categories", "concepts_per_category", "instances_per_concept"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {v!r}")
        if not isinstance(self.feature_dim, int) or self.feature_dim < 2:
            raise ConfigError(f"feature_dim: must be an integer >= 2, got {self.feature_dim!r}")
        for name in ("prototype_scale", "concept_offset_scale", "instance_noise_scale"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v >= 0):
                raise ConfigError(f"{name}: must be a finite real >= 0, got {v!r}")
        if self.feature_mode not in ("raw", "normalized"):
            raise ConfigError(f"feature_mode: expected 'raw' or 'normalized', got {self.feature_mode!r}")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass
class Concept:
    concept_id: int
    category_id: int
    prototype: np.ndarray  # concept mean feature vector


@dataclass
class SceneInstance:
    instance_id: int
    concept_id: int
    features: np.ndarray
    render_seed: int


@dataclass
class GamePair:
    """One referential game: receiver views (left, right), a target side, and
    the sender's views of the same two slots (identical at instance level,
    resampled same-concept instances at class level)."""

    left: SceneInstance
    right: SceneInstance
    target_side: str  # "L" | "R"
    sender_left: SceneInstance
    sender_right: SceneInstance

    @property
    def target(self) -> SceneInstance:
        return self.left if self.target_side == "L" else self.right

    @property
    def distractor(self) -> SceneInstance:
        return self.right if self.target_side == "L" else self.left

    @property
    def sender_target(self) -> SceneInstance:
        return self.sender_left if self.target_side == "L" else self.sender_right

    @property
    def sender_distractor(self) -> SceneInstance:
        return self.sender_right if self.target_side == "L" else self.sender_left


@dataclass
class World:
    config: WorldConfig
    concepts: list[Concept]
    instances: list[SceneInstance]
    instances_by_concept: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n_concepts(self) -> int:
        return len(self.concepts)

    @property
    def n_categories(self) -> int:
        return self.config.n_categories

    def category_of(self, concept_id: int) -> int:
        return self.concepts[concept_id].category_id

    def concept_name(self, concept_id: int) -> str:
        return f"concept-{concept_id:03d}"

    def categories_table(self) -> dict[int, int]:
        """concept_id -> category_id for every concept."""
        return {c.concept_id: c.category_id for c in self.concepts}

    def to_dict(self) -> dict:
        return {
            "schema_version": "world/1",
            "config": {
                "n_categories": self.config.n_categories,
                "concepts_per_category": self.config.concepts_per_category,
                "instances_per_concept": self.config.instances_per_concept,
                "feature_dim": self.config.feature_dim,
                "prototype_scale": self.config.prototype_scale,
                "concept_offset_scale": self.config.concept_offset_scale,
                "instance_noise_scale": self.config.instance_noise_scale,
                "feature_mode": self.config.feature_mode,
                "seed": self.config.seed,
            },
            "concepts": [
                {
                    "concept_id": c.concept_id,
                    "category_id": c.category_id,
                    "prototype": c.prototype.tolist(),
                }
                for c in self.concepts
            ],
            "instances": [
                {
                    "instance_id": i.instance_id,
                    "concept_id": i.concept_id,
                    "render_seed": i.render_seed,
                    "features": i.features.tolist(),
                }
                for i in self.instances
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "World":
        if doc.get("schema_version") != "world/1":
            raise ConfigError(f"schema_version: unsupported world schema {doc.get('schema_version')!r}")
        cfg = WorldConfig(**doc["config"])
        cfg.validate()
        concepts = [
            Concept(c["concept_id"], c["category_id"], np.asarray(c["prototype"], dtype=np.float64))
            for c in doc["concepts"]
        ]
        instances = [
            SceneInstance(
                i["instance_id"],
                i["concept_id"],
                np.asarray(i["features"], dtype=np.float64),
                int(i["render_seed"]),
            )
            for i in doc["instances"]
        ]
        return _index_world(World(cfg, concepts, instances))


def _index_world(world: World) -> World:
    by_concept: dict[int, list[int]] = {c.concept_id: [] for c in world.concepts}
    for inst in world.instances:
        by_concept[inst.concept_id].append(inst.instance_id)
    world.instances_by_concept = by_concept
    return world


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def generate_world(config: WorldConfig) -> World:
    """Build the full world from the config; bit-identical for equal configs."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    d = config.feature_dim
    n_concepts = config.n_categories * config.concepts_per_category
    n_instances = n_concepts * config.instances_per_concept

    category_protos = rng.normal(size=(config.n_categories, d))
    concept_offsets = rng.normal(size=(n_concepts, d))
    noise = rng.normal(size=(n_instances, d))
    render_seeds = rng.integers(0, 2**64 - 1, size=n_instances, dtype=np.uint64, endpoint=True)

    concepts: list[Concept] = []
    instances: list[SceneInstance] = []
    for cid in range(n_concepts):
        cat = cid // config.concepts_per_category
        proto = (
            category_protos[cat] * config.prototype_scale
            + concept_offsets[cid] * config.concept_offset_scale
        )
        concepts.append(Concept(cid, cat, proto))
        for j in range(config.instances_per_concept):
            iid = cid * config.instances_per_concept + j
            feats = proto + noise[iid] * config.instance_noise_scale
            if config.feature_mode == "normalized":
                feats = _softmax(feats)
            instances.append(SceneInstance(iid, cid, feats, int(render_seeds[iid])))

    return _index_world(World(config, concepts, instances))


def sample_game(world: World, mode: str, rng: np.random.Generator) -> GamePair:
    """Draw two distinct concepts, one instance each, and a target side."""
    if mode not in GAME_MODES:
        raise ConfigError(f"mode: expected one of {GAME_MODES}, got {mode!r}")
    if world.n_concepts < 2:
        raise DomainError("sampling a game needs a world with at least 2 concepts")

    c_left, c_right = rng.choice(world.n_concepts, size=2, replace=False)
    left = world.instances[_pick_instance(world, int(c_left), rng)]
    right = world.instances[_pick_instance(world, int(c_right), rng)]
    target_side = "L" if rng.integers(0, 2) == 0 else "R"

    if mode == INSTANCE_LEVEL:
        sender_left, sender_right = left, right
    else:
        sender_left = world.instances[_pick_instance(world, int(c_left), rng)]
        sender_right = world.instances[_pick_instance(world, int(c_right), rng)]

    return GamePair(left, right, target_side, sender_left, sender_right)


def _pick_instance(world: World, concept_id: int, rng: np.random.Generator) -> int:
    ids = world.instances_by_concept[concept_id]
    return ids[int(rng.integers(0, len(ids)))]


def make_test_set(world: World, mode: str, n_games: int, rng: np.random.Generator) -> list[GamePair]:
    if n_games < 0:
        raise ConfigError(f"n_games: must be >= 0, got {n_games}")
    return [sample_game(world, mode, rng) for _ in range(n_games)]


def default_world_config(seed: int = 0, **overrides) -> WorldConfig:
    """The desk-scale default: 10 categories x 10 concepts x 20 instances."""
    return replace(WorldConfig(seed=seed), **overrides)
