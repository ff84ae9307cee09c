"""One game round and test-phase evaluation.

The sender sees its two views target-first; the receiver sees the two images
in a uniformly random order plus the symbol, and nothing else. The payoff is
1 exactly when the receiver points at the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import (
    ReceiverAction,
    ReceiverParams,
    SenderAction,
    SenderParams,
    receiver_forward,
    sender_forward,
)
from .errors import DomainError
from .nn import GibbsConfig
from .world import GamePair

AGG_PAIR = "pair"
AGG_CONCEPT = "concept"


@dataclass
class RoundRecord:
    pair: GamePair
    symbol: int
    receiver_choice: int  # 0/1 in the receiver's shuffled frame
    target_hit: bool
    reward: float  # 0.0 or 1.0
    sender_action: SenderAction
    receiver_action: ReceiverAction
    shuffle: tuple[int, int]  # presented slot -> original side (0=L, 1=R)


@dataclass
class SymbolUsageMatrix:
    """Counts of symbol use per row, where a row is a game pair (keyed by the
    (target instance, distractor instance) ids) or a target concept."""

    row_keys: list
    counts: np.ndarray  # (n_rows, K) float64 counts
    aggregate: str = AGG_PAIR

    @property
    def n_rows(self) -> int:
        return self.counts.shape[0]

    def to_rows(self) -> list[dict]:
        out = []
        for key, row in zip(self.row_keys, self.counts):
            nz = {int(s): int(c) for s, c in enumerate(row) if c > 0}
            out.append({"row": list(key) if isinstance(key, tuple) else key, "counts": nz})
        return out

    @classmethod
    def from_rows(cls, rows: list[dict], vocab_size: int, aggregate: str) -> "SymbolUsageMatrix":
        keys = []
        counts = np.zeros((len(rows), vocab_size))
        for i, r in enumerate(rows):
            key = tuple(r["row"]) if isinstance(r["row"], list) else r["row"]
            keys.append(key)
            for s, c in r["counts"].items():
                counts[i, int(s)] = c
        return cls(keys, counts, aggregate)


@dataclass
class EvalReport:
    n_games: int
    comm_success: float  # percent
    used_symbols: int
    vocab_size: int
    usage: SymbolUsageMatrix
    per_concept_symbol_counts: dict[int, dict[int, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": "eval_report/1",
            "n_games": self.n_games,
            "comm_success": self.comm_success,
            "used_symbols": self.used_symbols,
            "vocab_size": self.vocab_size,
            "usage_aggregate": self.usage.aggregate,
            "usage_rows": self.usage.to_rows(),
            "per_concept_symbol_counts": {
                str(cid): {str(s): c for s, c in counts.items()}
                for cid, counts in sorted(self.per_concept_symbol_counts.items())
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        if doc.get("schema_version") != "eval_report/1":
            raise DomainError(f"unsupported eval report schema {doc.get('schema_version')!r}")
        usage = SymbolUsageMatrix.from_rows(
            doc["usage_rows"], doc["vocab_size"], doc["usage_aggregate"]
        )
        per_concept = {
            int(cid): {int(s): int(c) for s, c in counts.items()}
            for cid, counts in doc["per_concept_symbol_counts"].items()
        }
        return cls(
            n_games=doc["n_games"],
            comm_success=doc["comm_success"],
            used_symbols=doc["used_symbols"],
            vocab_size=doc["vocab_size"],
            usage=usage,
            per_concept_symbol_counts=per_concept,
        )


def play_round(
    sender: SenderParams,
    receiver: ReceiverParams,
    pair: GamePair,
    g: GibbsConfig,
    rng: np.random.Generator,
    greedy: bool = False,
) -> RoundRecord:
    """Sender speaks, receiver (shuffled order, no target knowledge) points."""
    s_action = sender_forward(
        sender, pair.sender_target.features, pair.sender_distractor.features, g, rng
    )
    shuffle = (0, 1) if rng.integers(0, 2) == 0 else (1, 0)
    presented = (pair.left, pair.right) if shuffle == (0, 1) else (pair.right, pair.left)
    r_action = receiver_forward(
        receiver, presented[0].features, presented[1].features, s_action.symbol, g, rng
    )
    if greedy:
        s_action.symbol = int(np.argmax(s_action.probs))
        r_action.side = int(np.argmax(r_action.probs))
    chosen_side = "L" if shuffle[r_action.side] == 0 else "R"
    hit = chosen_side == pair.target_side
    return RoundRecord(
        pair=pair,
        symbol=s_action.symbol,
        receiver_choice=r_action.side,
        target_hit=hit,
        reward=1.0 if hit else 0.0,
        sender_action=s_action,
        receiver_action=r_action,
        shuffle=shuffle,
    )


def build_usage_matrix(
    records: list[RoundRecord], vocab_size: int, aggregate: str = AGG_PAIR
) -> SymbolUsageMatrix:
    rows: dict = {}
    for rec in records:
        if aggregate == AGG_PAIR:
            key = (rec.pair.target.instance_id, rec.pair.distractor.instance_id)
        elif aggregate == AGG_CONCEPT:
            key = rec.pair.target.concept_id
        else:
            raise DomainError(f"unknown usage aggregation {aggregate!r}")
        rows.setdefault(key, np.zeros(vocab_size))[rec.symbol] += 1.0
    keys = sorted(rows.keys())
    counts = np.stack([rows[k] for k in keys]) if keys else np.zeros((0, vocab_size))
    return SymbolUsageMatrix(keys, counts, aggregate)


def evaluate(
    sender: SenderParams,
    receiver: ReceiverParams,
    test_set: list[GamePair],
    g: GibbsConfig,
    rng: np.random.Generator,
    greedy: bool = False,
    keep_records: bool = False,
) -> EvalReport | tuple[EvalReport, list[RoundRecord]]:
    """Play every test pair once and aggregate the test-phase statistics.

    Sampling stays stochastic by default: success is measured on sampled test
    plays, with `greedy` available for analysis only. Mutates nothing.
    """
    if not test_set:
        raise DomainError("evaluate needs a nonempty test set")
    records = [play_round(sender, receiver, pair, g, rng, greedy=greedy) for pair in test_set]
    vocab_size = receiver.vocab_size

    wins = sum(r.reward for r in records)
    emitted = {r.symbol for r in records}
    per_concept: dict[int, dict[int, int]] = {}
    for rec in records:
        cid = rec.pair.target.concept_id
        slot = per_concept.setdefault(cid, {})
        slot[rec.symbol] = slot.get(rec.symbol, 0) + 1

    report = EvalReport(
        n_games=len(records),
        comm_success=100.0 * wins / len(records),
        used_symbols=len(emitted),
        vocab_size=vocab_size,
        usage=build_usage_matrix(records, vocab_size),
        per_concept_symbol_counts=per_concept,
    )
    if keep_records:
        return report, records
    return report
