"""Measurement suite for a trained protocol: majority-symbol clustering,
purity against the category gold standard with a permutation-chance baseline,
the symbol-usage spectrum via SVD, and the naming match rate under grounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .agents import SenderParams
from .errors import DomainError
from .game import EvalReport, RoundRecord, SymbolUsageMatrix
from .nn import dense_forward, sigmoid_forward
from .world import World


@dataclass
class SymbolAssignment:
    """Majority symbol per concept, with tie bookkeeping."""

    mapping: dict[int, int]
    ties: dict[int, list[int]] = field(default_factory=dict)  # concept -> tied symbols
    omitted: list[int] = field(default_factory=list)          # concepts with no occurrences


@dataclass
class PurityResult:
    purity: float          # percent
    chance_mean: float     # percent
    obs_minus_chance: float
    p_value: float
    n_permutations: int

    def to_dict(self) -> dict:
        return {
            "purity": self.purity,
            "chance_mean": self.chance_mean,
            "obs_minus_chance": self.obs_minus_chance,
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
        }


def majority_symbol_map(report: EvalReport, concepts: list[int] | None = None) -> SymbolAssignment:
    """Assign each concept the symbol most often used when it was the target.

    Ties go to the lowest symbol index. Concepts from `concepts` that never
    occurred as a target are omitted from the mapping and listed.
    """
    mapping: dict[int, int] = {}
    ties: dict[int, list[int]] = {}
    seen = set()
    for cid, counts in report.per_concept_symbol_counts.items():
        if not counts:
            continue
        seen.add(cid)
        best = max(counts.values())
        winners = sorted(s for s, c in counts.items() if c == best)
        mapping[cid] = winners[0]
        if len(winners) > 1:
            ties[cid] = winners
    omitted = sorted(set(concepts or []) - seen)
    return SymbolAssignment(mapping, ties, omitted)


def purity(assign: SymbolAssignment, categories: dict[int, int]) -> float:
    """Percent of concepts whose category matches their cluster's modal category."""
    clusters: dict[int, list[int]] = {}
    for cid, sym in assign.mapping.items():
        if cid not in categories:
            raise DomainError(f"concept {cid} has no category label")
        clusters.setdefault(sym, []).append(categories[cid])
    total = 0
    agree = 0
    for members in clusters.values():
        counts = np.bincount(members)
        agree += int(counts.max())
        total += len(members)
    if total == 0:
        raise DomainError("purity of an empty assignment is undefined")
    return 100.0 * agree / total


def _purity_of_labels(symbols: np.ndarray, cats: np.ndarray) -> float:
    # Vectorized purity for permutation loops: group by symbol, sum modal counts.
    order = np.argsort(symbols, kind="stable")
    sy = symbols[order]
    ca = cats[order]
    agree = 0
    start = 0
    n = len(sy)
    while start < n:
        end = start
        while end < n and sy[end] == sy[start]:
            end += 1
        agree += int(np.bincount(ca[start:end]).max())
        start = end
    return 100.0 * agree / n


def permutation_chance(
    assign: SymbolAssignment,
    categories: dict[int, int],
    n_permutations: int = 10_000,
    rng: np.random.Generator | None = None,
) -> PurityResult:
    """Observed purity against purity under random permutations of the
    concept -> symbol assignment (cluster sizes preserved).

    p-value uses the permutation-inclusive estimator
    (1 + #{permuted >= observed}) / (n + 1), so it can never be zero.
    """
    if n_permutations < 1:
        raise DomainError("n_permutations must be >= 1")
    if len(assign.mapping) < 2:
        raise DomainError("permutation test needs at least 2 assigned concepts")
    rng = rng or np.random.default_rng(0)

    concepts = sorted(assign.mapping.keys())
    symbols = np.array([assign.mapping[c] for c in concepts])
    cats = np.array([categories[c] for c in concepts])
    observed = _purity_of_labels(symbols, cats)

    at_least = 0
    total = 0.0
    for _ in range(n_permutations):
        perm = rng.permutation(len(symbols))
        p = _purity_of_labels(symbols[perm], cats)
        total += p
        if p >= observed - 1e-12:
            at_least += 1
    chance_mean = total / n_permutations
    p_value = (1 + at_least) / (n_permutations + 1)
    return PurityResult(observed, chance_mean, observed - chance_mean, p_value, n_permutations)


# ---------------------------------------------------------------------------
# spectrum


def jacobi_eigenvalues(sym: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(sym, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DomainError(f"jacobi needs a square matrix, got {a.shape}")
    if n == 1:
        return a.diagonal().copy()
    threshold = tol * max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, (a**2).sum() - (a.diagonal() ** 2).sum()))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold / (n * n):
                    continue
                # Classic stable rotation angle computation.
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
    return a.diagonal().copy()


def usage_spectrum(usage: SymbolUsageMatrix | np.ndarray, center: bool = True) -> np.ndarray:
    """Normalized singular-value spectrum of the usage matrix, descending.

    Singular values come from Jacobi eigenvalues of the Gram matrix A^T A.
    With `center`, each symbol column has its mean (over rows) removed first,
    which drops the grand-mean component before decomposing.
    """
    a = usage.counts if isinstance(usage, SymbolUsageMatrix) else np.asarray(usage, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DomainError(f"usage spectrum needs a nonempty 2-D matrix, got shape {a.shape}")
    if not np.any(a):
        raise DomainError("usage spectrum of an all-zero matrix is undefined")
    a = np.array(a, dtype=np.float64)
    if center:
        a = a - a.mean(axis=0, keepdims=True)
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    eig = jacobi_eigenvalues(gram)
    sigma = np.sqrt(np.clip(eig, 0.0, None))
    sigma.sort()
    sigma = sigma[::-1]
    if sigma[0] <= 0.0:
        raise DomainError("usage matrix is zero after centering; spectrum undefined")
    return sigma / sigma[0]


# ---------------------------------------------------------------------------
# grounding interpretability


def grounding_match_rate(
    records: list[RoundRecord], label_set: dict[int, int], vocab_size: int
) -> tuple[float, float]:
    """Percent of label-set-target rounds where the emitted symbol equals the
    target's supervised label symbol, plus the chance rate 100/K."""
    relevant = [r for r in records if r.pair.target.concept_id in label_set]
    if not relevant:
        raise DomainError("no rounds with a label-set target concept")
    hits = sum(1 for r in relevant if r.symbol == label_set[r.pair.target.concept_id])
    return 100.0 * hits / len(relevant), 100.0 / vocab_size


# ---------------------------------------------------------------------------
# embedding export


def concept_embeddings(world: World, sender: SenderParams) -> np.ndarray:
    """Mean game-embedding (post-sigmoid) of each concept's instances."""
    rows = []
    for concept in world.concepts:
        embeds = []
        for iid in world.instances_by_concept[concept.concept_id]:
            pre, _ = dense_forward(sender.embed, world.instances[iid].features)
            e, _ = sigmoid_forward(pre)
            embeds.append(e)
        rows.append(np.mean(embeds, axis=0))
    return np.stack(rows)


def export_embeddings(world: World, sender: SenderParams, assign: SymbolAssignment, path) -> None:
    """CSV with one row per concept: mean embedding, majority symbol, category.

    Concept identity is the row order (world concept order); floats carry 17
    significant digits.
    """
    embeds = concept_embeddings(world, sender)
    dim = embeds.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"e{i}" for i in range(dim)] + ["majority_symbol", "category"])
        for concept, row in zip(world.concepts, embeds):
            sym = assign.mapping.get(concept.concept_id, -1)
            writer.writerow(
                [f"{v:.17g}" for v in row] + [sym, concept.category_id]
            )
