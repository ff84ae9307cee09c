"""Versioned JSON artifacts: worlds, checkpoints, manifests, metrics, exports.

Everything is plain JSON with decimal float encoding (inspectable at desk
scale), written atomically (temp file + rename) so readers never observe a
partial document. Checkpoints round-trip losslessly: save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .agents import (
    AGNOSTIC,
    INFORMED,
    AgnosticSenderParams,
    InformedSenderParams,
    ReceiverParams,
    SenderParams,
)
from .errors import CheckpointError, ManifestError
from .game import EvalReport
from .nn import DenseParams, PairConvParams
from .training import BaselineState, TrainConfig
from .world import World, WorldConfig

CHECKPOINT_SCHEMA = "checkpoint/1"
MANIFEST_SCHEMA = "manifest/1"


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------
# worlds


def save_world(path, world: World) -> None:
    atomic_write_json(path, world.to_dict())


def load_world(path) -> World:
    with open(path) as fh:
        return World.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# parameter tensors


def _tensor_doc(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}


def _tensor_load(name: str, doc: dict) -> np.ndarray:
    shape = tuple(doc["shape"])
    data = doc["data"]
    expected = int(np.prod(shape)) if shape else 1
    if len(data) != expected:
        raise CheckpointError(
            f"tensor {name}: {len(data)} values do not fill shape {list(shape)}"
        )
    return np.array(data, dtype=np.float64).reshape(shape)


def sender_tensors(sender: SenderParams) -> dict:
    doc = {
        "embed.weights": _tensor_doc(sender.embed.weights),
        "embed.bias": _tensor_doc(sender.embed.bias),
        "out.weights": _tensor_doc(sender.out.weights),
        "out.bias": _tensor_doc(sender.out.bias),
    }
    if isinstance(sender, InformedSenderParams):
        doc["pairconv.filters"] = _tensor_doc(sender.pairconv.filters)
        doc["pairconv.combiner"] = _tensor_doc(sender.pairconv.combiner)
    return doc


def receiver_tensors(receiver: ReceiverParams) -> dict:
    return {
        "img_embed.weights": _tensor_doc(receiver.img_embed.weights),
        "img_embed.bias": _tensor_doc(receiver.img_embed.bias),
        "sym_embed.weights": _tensor_doc(receiver.sym_embed.weights),
        "sym_embed.bias": _tensor_doc(receiver.sym_embed.bias),
    }


def _load_dense(tensors: dict, prefix: str) -> DenseParams:
    try:
        w = _tensor_load(f"{prefix}.weights", tensors[f"{prefix}.weights"])
        b = _tensor_load(f"{prefix}.bias", tensors[f"{prefix}.bias"])
    except KeyError as exc:
        raise CheckpointError(f"missing tensor {exc.args[0]}") from exc
    return DenseParams(w, b)


def load_sender(arch: str, tensors: dict) -> SenderParams:
    embed = _load_dense(tensors, "embed")
    out = _load_dense(tensors, "out")
    if arch == AGNOSTIC:
        return AgnosticSenderParams(embed=embed, out=out)
    if arch == INFORMED:
        try:
            filters = _tensor_load("pairconv.filters", tensors["pairconv.filters"])
            combiner = _tensor_load("pairconv.combiner", tensors["pairconv.combiner"])
        except KeyError as exc:
            raise CheckpointError(f"missing tensor {exc.args[0]}") from exc
        return InformedSenderParams(embed=embed, pairconv=PairConvParams(filters, combiner), out=out)
    raise CheckpointError(f"unknown sender architecture {arch!r}")


def load_receiver(tensors: dict) -> ReceiverParams:
    return ReceiverParams(
        img_embed=_load_dense(tensors, "img_embed"),
        sym_embed=_load_dense(tensors, "sym_embed"),
    )


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    train_config: TrainConfig
    iteration: int
    sender: SenderParams
    receiver: ReceiverParams
    baseline: BaselineState | None
    rng_descriptor: dict
    label_set: dict[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": CHECKPOINT_SCHEMA,
            "train_config": self.train_config.to_dict(),
            "iteration": self.iteration,
            "sender": {"arch": self.train_config.arch, "tensors": sender_tensors(self.sender)},
            "receiver": {"tensors": receiver_tensors(self.receiver)},
            "baseline": (
                None if self.baseline is None
                else {
                    "mean": self.baseline.mean,
                    "decay": self.baseline.decay,
                    "raw": self.baseline._raw,
                    "weight": self.baseline._weight,
                }
            ),
            "rng": self.rng_descriptor,
            "label_set": (
                None if self.label_set is None
                else {str(c): s for c, s in sorted(self.label_set.items())}
            ),
        }


def _expect_shape(name: str, arr: np.ndarray, shape: tuple) -> None:
    if arr.shape != shape:
        raise CheckpointError(
            f"tensor {name}: shape {list(arr.shape)} does not match the declared "
            f"architecture (expected {list(shape)})"
        )


def _check_checkpoint_shapes(cfg: TrainConfig, sender: SenderParams, receiver: ReceiverParams) -> None:
    k, e, f = cfg.vocab_size, cfg.embed_dim, cfg.n_filters
    _expect_shape("embed.weights", sender.embed.weights, (e, sender.embed.in_dim))
    if isinstance(sender, InformedSenderParams):
        _expect_shape("pairconv.filters", sender.pairconv.filters, (f, 2))
        _expect_shape("pairconv.combiner", sender.pairconv.combiner, (f,))
        _expect_shape("out.weights", sender.out.weights, (k, e))
    else:
        _expect_shape("out.weights", sender.out.weights, (k, 2 * e))
    _expect_shape("img_embed.weights", receiver.img_embed.weights, (e, receiver.img_embed.in_dim))
    _expect_shape("sym_embed.weights", receiver.sym_embed.weights, (e, k))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    atomic_write_json(path, ckpt.to_dict())


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupted checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointError(
            f"unknown checkpoint schema {doc.get('schema_version')!r}" if isinstance(doc, dict)
            else "corrupted checkpoint: not a JSON object"
        )
    try:
        cfg = TrainConfig.from_dict(doc["train_config"])
        sender = load_sender(doc["sender"]["arch"], doc["sender"]["tensors"])
        receiver = load_receiver(doc["receiver"]["tensors"])
        baseline_doc = doc.get("baseline")
        baseline = None
        if baseline_doc is not None:
            baseline = BaselineState(
                mean=baseline_doc["mean"],
                decay=baseline_doc["decay"],
                _raw=baseline_doc.get("raw", baseline_doc["mean"]),
                _weight=baseline_doc.get("weight", 1.0),
            )
        labels = doc.get("label_set")
        label_set = None if labels is None else {int(c): int(s) for c, s in labels.items()}
        ckpt = Checkpoint(
            train_config=cfg,
            iteration=int(doc["iteration"]),
            sender=sender,
            receiver=receiver,
            baseline=baseline,
            rng_descriptor=doc.get("rng", {}),
            label_set=label_set,
        )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing field {exc.args[0]!r}") from exc
    _check_checkpoint_shapes(cfg, ckpt.sender, ckpt.receiver)
    return ckpt


# ---------------------------------------------------------------------------
# manifests

_WORLD_FIELDS = set(WorldConfig.__dataclass_fields__)
_TRAIN_FIELDS = set(TrainConfig.__dataclass_fields__)


@dataclass
class ExperimentManifest:
    world: WorldConfig
    train: TrainConfig
    run_id: str = "run"
    out_dir: str = "runs/run"

    def to_dict(self) -> dict:
        return {
            "schema_version": MANIFEST_SCHEMA,
            "run_id": self.run_id,
            "out_dir": self.out_dir,
            "world": {f: getattr(self.world, f) for f in WorldConfig.__dataclass_fields__},
            "train": self.train.to_dict(),
        }


def manifest_from_dict(doc: dict) -> ExperimentManifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    version = doc.get("schema_version", MANIFEST_SCHEMA)
    if version != MANIFEST_SCHEMA:
        raise ManifestError(f"schema_version: unsupported manifest schema {version!r}")
    known_top = {"schema_version", "run_id", "out_dir", "world", "train"}
    for key in doc:
        if key not in known_top:
            raise ManifestError(f"unknown manifest key {key!r}")

    world_doc = doc.get("world", {})
    for key in world_doc:
        if key not in _WORLD_FIELDS:
            raise ManifestError(f"unknown world config key {key!r}")
    world_cfg = WorldConfig(**world_doc)
    world_cfg.validate()

    train_doc = dict(doc.get("train", {}))
    for key in train_doc:
        if key not in _TRAIN_FIELDS:
            raise ManifestError(f"unknown train config key {key!r}")
    try:
        train_cfg = TrainConfig.from_dict(train_doc)
    except TypeError as exc:
        raise ManifestError(f"invalid train config: {exc}") from exc

    run_id = doc.get("run_id", "run")
    out_dir = doc.get("out_dir", f"runs/{run_id}")
    return ExperimentManifest(world=world_cfg, train=train_cfg, run_id=run_id, out_dir=out_dir)


def load_manifest(path) -> ExperimentManifest:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    return manifest_from_dict(doc)


def save_manifest(path, manifest: ExperimentManifest) -> None:
    atomic_write_json(path, manifest.to_dict())


# ---------------------------------------------------------------------------
# metrics, reports, exports


def save_metrics_jsonl(path, metrics: list[dict]) -> None:
    atomic_write_text(path, "".join(json.dumps(m) + "\n" for m in metrics))


def load_metrics_jsonl(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def save_eval_report(path, report: EvalReport) -> None:
    atomic_write_json(path, report.to_dict())


def load_eval_report(path) -> EvalReport:
    with open(path) as fh:
        return EvalReport.from_dict(json.load(fh))


def export_usage_csv(path, report: EvalReport) -> None:
    """Symbol-usage counts per target concept, rows labeled by concept id."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["concept"] + [f"s{k}" for k in range(report.vocab_size)])
        for cid in sorted(report.per_concept_symbol_counts):
            counts = report.per_concept_symbol_counts[cid]
            writer.writerow([cid] + [counts.get(s, 0) for s in range(report.vocab_size)])


def export_spectrum_csv(path, spectrum: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "normalized_singular_value"])
        for i, v in enumerate(spectrum):
            writer.writerow([i, f"{v:.17g}"])
