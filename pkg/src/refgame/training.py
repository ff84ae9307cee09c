"""Reinforce training over mini-batches, with the class-level game variant and
the grounding mode that interleaves supervised concept naming on shared
sender layers.

An iteration is one trial (one game round, or one supervised example when a
grounded step is drawn); parameter updates happen once per `batch_size`
trials. The whole run is a pure function of (config, world).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import (
    AGNOSTIC,
    ARCHITECTURES,
    INFORMED,
    AgentDims,
    AgnosticSenderParams,
    ReceiverParams,
    SenderParams,
    Vocabulary,
    init_agents,
    receiver_logprob_grad,
    sender_logprob_grad,
)
from .errors import ConfigError, ShapeError
from .game import RoundRecord, evaluate, play_round
from .nn import (
    GibbsConfig,
    add_scaled,
    dense_backward,
    dense_forward,
    sgd_apply,
    sigmoid_backward,
    sigmoid_forward,
    zeros_like_params,
)
from .world import GAME_MODES, INSTANCE_LEVEL, World, make_test_set, sample_game

BASELINE_NONE = "none"
BASELINE_RUNNING_MEAN = "running_mean"

LOG_INTERVAL = 100   # trials between metrics records
EVAL_GAMES = 200     # held-out games per metrics record

# The two senders concentrate their vocabularies at very different speeds, so
# their default step sizes differ; both were calibrated on the desk world.
DEFAULT_LR = {INFORMED: 13.0, AGNOSTIC: 30.0}


@dataclass(frozen=True)
class TrainConfig:
    arch: str = INFORMED
    vocab_size: int = 100
    embed_dim: int = 50
    n_filters: int = 20
    tau: float = 10.0
    batch_size: int = 32
    n_iterations: int = 10_000
    lr: float | None = None  # None: architecture default (see DEFAULT_LR)
    baseline: str = BASELINE_RUNNING_MEAN
    mode: str = INSTANCE_LEVEL
    grounding: bool = False
    supervised_label_set: dict[int, int] | None = None  # concept_id -> symbol
    seed: int = 0

    def validate(self) -> None:
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"arch: expected one of {ARCHITECTURES}, got {self.arch!r}")
        Vocabulary(self.vocab_size)
        for name in ("embed_dim", "n_filters", "batch_size", "n_iterations"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {v!r}")
        if not (isinstance(self.tau, (int, float)) and self.tau > 0):
            raise ConfigError(f"tau: must be > 0, got {self.tau!r}")
        if self.lr is not None and not (isinstance(self.lr, (int, float)) and np.isfinite(self.lr)):
            raise ConfigError(f"lr: must be a finite real or null, got {self.lr!r}")
        if self.baseline not in (BASELINE_NONE, BASELINE_RUNNING_MEAN):
            raise ConfigError(f"baseline: expected 'none' or 'running_mean', got {self.baseline!r}")
        if self.mode not in GAME_MODES:
            raise ConfigError(f"mode: expected one of {GAME_MODES}, got {self.mode!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a nonnegative integer, got {self.seed!r}")
        if self.grounding and self.supervised_label_set is not None:
            self._validate_label_set(self.supervised_label_set)

    def _validate_label_set(self, labels: dict[int, int]) -> None:
        if not labels:
            raise ConfigError("supervised_label_set: grounding needs a nonempty label set")
        if len(labels) > self.vocab_size:
            raise ConfigError(
                f"supervised_label_set: {len(labels)} labels exceed vocabulary of {self.vocab_size}"
            )
        symbols = list(labels.values())
        if len(set(symbols)) != len(symbols):
            raise ConfigError("supervised_label_set: concept->symbol map must be injective")
        for s in symbols:
            if not (0 <= s < self.vocab_size):
                raise ConfigError(f"supervised_label_set: symbol {s} out of vocabulary range")

    def gibbs(self) -> GibbsConfig:
        return GibbsConfig(tau=float(self.tau))

    def effective_lr(self) -> float:
        return float(self.lr) if self.lr is not None else DEFAULT_LR[self.arch]

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "n_filters": self.n_filters,
            "tau": self.tau,
            "batch_size": self.batch_size,
            "n_iterations": self.n_iterations,
            "lr": self.lr,
            "baseline": self.baseline,
            "mode": self.mode,
            "grounding": self.grounding,
            "supervised_label_set": (
                None
                if self.supervised_label_set is None
                else {str(c): s for c, s in sorted(self.supervised_label_set.items())}
            ),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f: doc[f] for f in doc}
        labels = known.get("supervised_label_set")
        if labels is not None:
            known["supervised_label_set"] = {int(c): int(s) for c, s in labels.items()}
        cfg = cls(**known)
        cfg.validate()
        return cfg


@dataclass
class BaselineState:
    """Exponential running mean of the reward, for variance reduction.

    Bias-corrected (Adam-style) so the baseline tracks the empirical mean from
    the first batch instead of ramping up from zero; an uncorrected zero start
    makes every early win a positive advantage, which ratchets the sender onto
    an arbitrary symbol before the receiver can learn anything.
    """

    mean: float = 0.0
    decay: float = 0.99
    _raw: float = 0.0
    _weight: float = 0.0

    def update(self, batch_mean_reward: float) -> None:
        self._raw = self.decay * self._raw + (1.0 - self.decay) * batch_mean_reward
        self._weight = self.decay * self._weight + (1.0 - self.decay)
        self.mean = self._raw / self._weight


def default_label_set(world: World, vocab_size: int) -> dict[int, int]:
    """Injective concept -> symbol map over the first min(K, n_concepts) concepts."""
    n = min(vocab_size, world.n_concepts)
    return {cid: cid for cid in range(n)}


# ---------------------------------------------------------------------------
# updates


def reinforce_batch_update(
    sender: SenderParams,
    receiver: ReceiverParams,
    records: list[RoundRecord],
    lr: float,
    baseline: BaselineState | None,
) -> tuple[SenderParams, ReceiverParams, dict]:
    """One ascent step on E[reward] from a batch of played rounds.

    Each round contributes advantage * grad log pi for both agents (the payoff
    is shared); contributions are batch-averaged. The baseline value is read
    before the update and refreshed after.
    """
    if not records:
        raise ConfigError("reinforce_batch_update: empty batch")
    b = baseline.mean if baseline is not None else 0.0
    scale = 1.0 / len(records)

    s_dir = zeros_like_params(sender)
    r_dir = zeros_like_params(receiver)
    for rec in records:
        advantage = rec.reward - b
        if advantage == 0.0:
            continue
        try:
            s_dir = add_scaled(s_dir, sender_logprob_grad(sender, rec.sender_action), advantage * scale)
            r_dir = add_scaled(r_dir, receiver_logprob_grad(receiver, rec.receiver_action), advantage * scale)
        except (ValueError, ShapeError) as exc:
            raise ShapeError(f"stale round record incompatible with current parameters: {exc}") from exc

    # The informed combiner lives in the zero-mean subspace: its common mode
    # only adds an input-independent drift that absorbs the policy, so the
    # update is projected onto the constraint surface.
    if hasattr(s_dir, "pairconv"):
        s_dir.pairconv.combiner -= s_dir.pairconv.combiner.mean()

    # Ascent on E[R]: sgd_apply subtracts, so feed the negated direction.
    new_sender = sgd_apply(sender, s_dir, -lr)
    new_receiver = sgd_apply(receiver, r_dir, -lr)

    mean_reward = float(np.mean([rec.reward for rec in records]))
    if baseline is not None:
        baseline.update(mean_reward)
    return new_sender, new_receiver, {"mean_reward": mean_reward, "baseline": b}


def _classification_forward(sender: SenderParams, features: np.ndarray):
    """Shared-layer naming path: embed + sigmoid + vocabulary head, plain softmax.

    The informed head consumes the embedding directly; the agnostic head was
    built for a two-embedding concatenation, so the single embedding is
    duplicated to fill both slots.
    """
    pre, c_embed = dense_forward(sender.embed, features)
    e, c_sig = sigmoid_forward(pre)
    duplicated = isinstance(sender, AgnosticSenderParams)
    head_in = np.concatenate([e, e]) if duplicated else e
    scores, c_out = dense_forward(sender.out, head_in)
    z = scores - scores.max()
    probs = np.exp(z) / np.exp(z).sum()
    return probs, (c_embed, c_sig, c_out, duplicated, e.shape[0])


def supervised_loss_and_grads(sender: SenderParams, features: np.ndarray, gold_symbol: int):
    """Cross-entropy loss and its exact gradients on the shared layers."""
    probs, (c_embed, c_sig, c_out, duplicated, embed_dim) = _classification_forward(sender, features)
    loss = -float(np.log(max(probs[gold_symbol], 1e-300)))
    d_scores = probs.copy()
    d_scores[gold_symbol] -= 1.0  # softmax CE gradient: probs - onehot(gold)
    g_out, d_head_in = dense_backward(c_out, d_scores)
    d_e = d_head_in[:embed_dim] + d_head_in[embed_dim:] if duplicated else d_head_in
    g_embed, _ = dense_backward(c_embed, sigmoid_backward(c_sig, d_e))

    grads = zeros_like_params(sender)
    grads.embed = g_embed
    grads.out = g_out
    return loss, grads


def supervised_update(
    sender: SenderParams,
    features: np.ndarray,
    gold_symbol: int,
    lr: float,
    label_symbols: set[int] | None = None,
) -> tuple[SenderParams, float]:
    """One naming example: descend the cross-entropy on the shared layers."""
    if label_symbols is not None and gold_symbol not in label_symbols:
        raise ConfigError(f"gold_symbol {gold_symbol} is not in the supervised label set")
    loss, grads = supervised_loss_and_grads(sender, features, gold_symbol)
    return sgd_apply(sender, grads, lr), loss


def supervised_batch_update(
    sender: SenderParams,
    examples: list[tuple[np.ndarray, int]],
    lr: float,
) -> tuple[SenderParams, float]:
    grads = zeros_like_params(sender)
    total = 0.0
    for features, gold in examples:
        loss, g = supervised_loss_and_grads(sender, features, gold)
        grads = add_scaled(grads, g, 1.0 / len(examples))
        total += loss
    return sgd_apply(sender, grads, lr), total / len(examples)


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class TrainResult:
    config: TrainConfig
    sender: SenderParams
    receiver: ReceiverParams
    baseline: BaselineState | None
    metrics: list[dict] = field(default_factory=list)
    games_played: int = 0
    label_set: dict[int, int] | None = None


def train(
    config: TrainConfig,
    world: World,
    log_interval: int = LOG_INTERVAL,
    eval_games: int = EVAL_GAMES,
    stop_at_success: float | None = None,
) -> TrainResult:
    """Run the full training loop; deterministic given (config, world).

    `stop_at_success` ends the run early once a logged eval reaches that
    success percentage (used for convergence-speed measurements).
    """
    config.validate()
    if world.n_concepts < 2:
        raise ConfigError("world: needs at least 2 concepts to train on")

    dims = AgentDims(world.config.feature_dim, config.embed_dim, config.n_filters)
    vocab = Vocabulary(config.vocab_size)
    g = config.gibbs()

    ss = np.random.SeedSequence(config.seed)
    init_ss, game_ss, coin_ss, eval_ss = ss.spawn(4)
    rng_init = np.random.default_rng(init_ss)
    rng_game = np.random.default_rng(game_ss)
    rng_coin = np.random.default_rng(coin_ss)
    eval_master = eval_ss

    sender, receiver = init_agents(config.arch, dims, vocab, rng_init)
    baseline = BaselineState() if config.baseline == BASELINE_RUNNING_MEAN else None

    label_set = None
    if config.grounding:
        label_set = config.supervised_label_set or default_label_set(world, config.vocab_size)
        config._validate_label_set(label_set)
        label_concepts = sorted(label_set.keys())

    eval_set = make_test_set(world, config.mode, eval_games, np.random.default_rng(eval_master.spawn(1)[0]))

    metrics: list[dict] = []
    lr = config.effective_lr()
    reward_ma = 0.0
    ma_decay = 0.99
    games_done = 0
    next_log = log_interval

    while games_done < config.n_iterations:
        batch = min(config.batch_size, config.n_iterations - games_done)
        grounded_step = bool(config.grounding and rng_coin.integers(0, 2) == 1)

        if grounded_step:
            examples = []
            for _ in range(batch):
                cid = label_concepts[int(rng_game.integers(0, len(label_concepts)))]
                iid = world.instances_by_concept[cid][
                    int(rng_game.integers(0, len(world.instances_by_concept[cid])))
                ]
                examples.append((world.instances[iid].features, label_set[cid]))
            sender, _ = supervised_batch_update(sender, examples, lr)
            step_mode = "supervised"
        else:
            records = []
            for _ in range(batch):
                pair = sample_game(world, config.mode, rng_game)
                rec = play_round(sender, receiver, pair, g, rng_game)
                reward_ma = ma_decay * reward_ma + (1.0 - ma_decay) * rec.reward
                records.append(rec)
            sender, receiver, _ = reinforce_batch_update(sender, receiver, records, lr, baseline)
            step_mode = "game"

        games_done += batch

        if games_done >= next_log or games_done >= config.n_iterations:
            report = evaluate(sender, receiver, eval_set, g, np.random.default_rng(eval_master.spawn(1)[0]))
            metrics.append(
                {
                    "iteration": games_done,
                    "mode": step_mode,
                    "train_reward_ma": reward_ma,
                    "eval_success": report.comm_success,
                    "used_symbols": report.used_symbols,
                }
            )
            while next_log <= games_done:
                next_log += log_interval
            if stop_at_success is not None and report.comm_success >= stop_at_success:
                break

    return TrainResult(
        config=config,
        sender=sender,
        receiver=receiver,
        baseline=baseline,
        metrics=metrics,
        games_played=games_done,
        label_set=label_set,
    )
