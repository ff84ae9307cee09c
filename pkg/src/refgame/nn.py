"""Minimal numeric kernels the agents are built from.

Dense and pairwise-convolution layers with explicit forward caches and
hand-written backward passes, temperature softmax (Gibbs) discretization,
categorical sampling, and plain SGD. Everything is float64 and pure:
identical inputs (and rng state) give identical outputs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DistributionError, NumericError, ShapeError

__all__ = [
    "DenseParams",
    "PairConvParams",
    "GibbsConfig",
    "dense_forward",
    "dense_backward",
    "sigmoid_forward",
    "sigmoid_backward",
    "pair_conv_forward",
    "pair_conv_backward",
    "gibbs",
    "gibbs_logprob_grad",
    "sample_categorical",
    "sgd_apply",
    "zeros_like_params",
    "add_scaled",
    "scale_params",
    "flatten_params",
    "glorot_dense",
    "glorot_pair_conv",
]


@dataclass
class DenseParams:
    """Affine layer y = W x + b with W of shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError(
                f"dense expects 2-D weights and 1-D bias, got {self.weights.shape} / {self.bias.shape}"
            )
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"dense weights {self.weights.shape} incompatible with bias {self.bias.shape}"
            )
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise NumericError("dense parameters must be finite")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class PairConvParams:
    """f kernels of size 2x1 over an (a, b) vector pair, plus the fx1 combiner."""

    filters: np.ndarray   # (f, 2)
    combiner: np.ndarray  # (f,)

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.float64)
        self.combiner = np.asarray(self.combiner, dtype=np.float64)
        if self.filters.ndim != 2 or self.filters.shape[1] != 2:
            raise ShapeError(f"pair-conv filters must be (f, 2), got {self.filters.shape}")
        if self.filters.shape[0] < 1:
            raise ConfigError("n_filters: need at least one pair-conv filter")
        if self.combiner.shape != (self.filters.shape[0],):
            raise ShapeError(
                f"combiner {self.combiner.shape} incompatible with filters {self.filters.shape}"
            )
        if not (np.isfinite(self.filters).all() and np.isfinite(self.combiner).all()):
            raise NumericError("pair-conv parameters must be finite")

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]


@dataclass(frozen=True)
class GibbsConfig:
    """Temperature softmax over raw scores.

    `exponent` records whether scores are divided or multiplied by tau;
    the source convention is not pinned down, divide is the default.
    """

    tau: float = 10.0
    exponent: str = "divide"

    def __post_init__(self):
        if not (self.tau > 0.0 and np.isfinite(self.tau)):
            raise ConfigError(f"tau: must be a finite positive real, got {self.tau}")
        if self.exponent not in ("divide", "multiply"):
            raise ConfigError(f"exponent: expected 'divide' or 'multiply', got {self.exponent!r}")

    def scaled(self, scores: np.ndarray) -> np.ndarray:
        if self.exponent == "divide":
            return scores / self.tau
        return scores * self.tau

    def score_scale(self) -> float:
        """d(scaled score)/d(score): 1/tau for divide, tau for multiply."""
        return 1.0 / self.tau if self.exponent == "divide" else self.tau


# ---------------------------------------------------------------------------
# forward / backward kernels


def dense_forward(p: DenseParams, x: np.ndarray) -> tuple[np.ndarray, tuple]:
    """y = W x + b. The cache retains (p, x) for the backward pass."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.in_dim,):
        raise ShapeError(f"dense expects input of dim {p.in_dim}, got {x.shape}")
    y = p.weights @ x + p.bias
    return y, (p, x)


def dense_backward(cache: tuple, upstream: np.ndarray) -> tuple[DenseParams, np.ndarray]:
    """Gradients (dW = upstream outer x, db = upstream) and downstream = W^T upstream."""
    p, x = cache
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (p.out_dim,):
        raise ShapeError(f"dense backward expects upstream of dim {p.out_dim}, got {upstream.shape}")
    grads = DenseParams(np.outer(upstream, x), upstream.copy())
    downstream = p.weights.T @ upstream
    return grads, downstream


def sigmoid_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise logistic; the cache is the output itself."""
    x = np.asarray(x, dtype=np.float64)
    # Split by sign so exp never overflows.
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.clip(x, 0, None))),
                 np.exp(np.clip(x, None, 0)) / (1.0 + np.exp(np.clip(x, None, 0))))
    return y, y


def sigmoid_backward(cache: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    y = cache
    return upstream * y * (1.0 - y)


def pair_conv_forward(
    p: PairConvParams, a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, tuple]:
    """Per-dimension comparison of two d-vectors.

    Each 2x1 filter k produces m_k = sigmoid(w_k0 * a + w_k1 * b) elementwise;
    the fx1 combiner collapses the f maps back to one d-vector.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"pair-conv expects two equal-length vectors, got {a.shape} / {b.shape}")
    pre = p.filters[:, 0:1] * a[None, :] + p.filters[:, 1:2] * b[None, :]  # (f, d)
    maps, _ = sigmoid_forward(pre)
    out = p.combiner @ maps  # (d,)
    return out, (p, a, b, maps)


def pair_conv_backward(
    cache: tuple, upstream: np.ndarray
) -> tuple[PairConvParams, np.ndarray, np.ndarray]:
    """Gradients for filters and combiner plus downstream gradients for (a, b)."""
    p, a, b, maps = cache
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != a.shape:
        raise ShapeError(f"pair-conv backward expects upstream of dim {a.shape}, got {upstream.shape}")
    d_combiner = maps @ upstream  # (f,)
    d_pre = (p.combiner[:, None] * upstream[None, :]) * maps * (1.0 - maps)  # (f, d)
    d_filters = np.stack([d_pre @ a, d_pre @ b], axis=1)  # (f, 2)
    da = p.filters[:, 0] @ d_pre
    db = p.filters[:, 1] @ d_pre
    return PairConvParams(d_filters, d_combiner), da, db


def gibbs(scores: np.ndarray, g: GibbsConfig) -> np.ndarray:
    """Temperature softmax with max-subtraction; sums to 1 within 1e-12."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] < 1:
        raise ShapeError(f"gibbs expects a nonempty 1-D score vector, got shape {scores.shape}")
    if not np.isfinite(scores).all():
        raise NumericError("gibbs scores must be finite")
    z = g.scaled(scores)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def gibbs_logprob_grad(probs: np.ndarray, sampled: int, g: GibbsConfig) -> np.ndarray:
    """d log probs[sampled] / d score_j = (1[j = sampled] - probs_j) * dz/dscore."""
    grad = -probs.copy()
    grad[sampled] += 1.0
    return grad * g.score_scale()


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index with the given probabilities; deterministic given rng state."""
    probs = np.asarray(probs, dtype=np.float64)
    total = probs.sum()
    if probs.ndim != 1 or (probs < -1e-12).any() or abs(total - 1.0) > 1e-9:
        raise DistributionError(f"not a probability distribution (sum={total!r})")
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, probs.shape[0] - 1)


# ---------------------------------------------------------------------------
# parameter trees
#
# Parameter containers are dataclasses whose fields are either ndarrays or
# nested parameter dataclasses. Gradients reuse the same container types, so
# the helpers below walk the structure generically.


def _tree_map(fn, *params):
    first = params[0]
    if isinstance(first, np.ndarray):
        return fn(*params)
    if dataclasses.is_dataclass(first):
        kwargs = {
            f.name: _tree_map(fn, *(getattr(p, f.name) for p in params))
            for f in dataclasses.fields(first)
        }
        return first.__class__(**kwargs)
    raise ShapeError(f"not a parameter tree node: {type(first).__name__}")


def sgd_apply(params, grads, lr: float):
    """params' = params - lr * grads, elementwise over the whole tree."""
    return _tree_map(lambda p, g: p - lr * g, params, grads)


def zeros_like_params(params):
    return _tree_map(np.zeros_like, params)


def add_scaled(acc, grads, scale: float):
    """acc + scale * grads (returns a new tree; inputs untouched)."""
    return _tree_map(lambda a, g: a + scale * g, acc, grads)


def scale_params(params, scale: float):
    return _tree_map(lambda p: p * scale, params)


def flatten_params(params) -> np.ndarray:
    """All leaves concatenated into one flat vector (field order, row-major)."""
    out: list[np.ndarray] = []

    def walk(node):
        if isinstance(node, np.ndarray):
            out.append(node.ravel())
        else:
            for f in dataclasses.fields(node):
                walk(getattr(node, f.name))

    walk(params)
    return np.concatenate(out) if out else np.zeros(0)


# ---------------------------------------------------------------------------
# initialization


def glorot_dense(rng: np.random.Generator, out_dim: int, in_dim: int) -> DenseParams:
    """Uniform [-a, a] with a = sqrt(6 / (fan_in + fan_out)); zero bias."""
    a = np.sqrt(6.0 / (in_dim + out_dim))
    return DenseParams(rng.uniform(-a, a, size=(out_dim, in_dim)), np.zeros(out_dim))


def glorot_pair_conv(rng: np.random.Generator, n_filters: int) -> PairConvParams:
    a_f = np.sqrt(6.0 / (2 + 1))
    a_c = np.sqrt(6.0 / (n_filters + 1))
    return PairConvParams(
        rng.uniform(-a_f, a_f, size=(n_filters, 2)),
        rng.uniform(-a_c, a_c, size=n_filters),
    )
