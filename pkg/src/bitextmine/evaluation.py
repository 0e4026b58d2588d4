"""Alignment scoring against gold: Top-k accuracy with exact index matching,
precision/recall/F1 over a threshold grid, and deterministic fold splitting
for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .aligner import AlignmentResult, CandidateList
from .corpus_io import GoldAlignment
from .errors import ValidationError
from .similarity import Metric

# Grid used when no thresholds are given: the "no threshold" sentinel first,
# then 0.0 .. 0.95 in steps of 0.05. None means no filtering; -0.2 is its
# conventional on-disk spelling (cosine scores are clamped to [-1, 1], so any
# value <= -1 would do, and -0.2 is the customary sentinel).
NO_THRESHOLD_SENTINEL = -0.2


def default_threshold_grid() -> list[float | None]:
    return [None] + [round(i * 0.05, 2) for i in range(20)]


def threshold_to_number(threshold: float | None) -> float:
    return NO_THRESHOLD_SENTINEL if threshold is None else threshold


def number_to_threshold(value: float) -> float | None:
    return None if value <= NO_THRESHOLD_SENTINEL else value


@dataclass(frozen=True)
class ThresholdRow:
    """Precision/recall/F1 and pair count at one cosine threshold.

    ``precision`` is None when no pairs survive the cutoff; it is reported
    as "n/a" rather than silently defined.
    """

    threshold: float | None
    precision: float | None
    recall: float
    f1: float
    aligned_count: int


@dataclass(frozen=True)
class EvalReport:
    top_k_accuracy: dict[int, float]
    threshold_rows: list[ThresholdRow]
    n_queries: int


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint index folds fully determined by (n, k_folds, seed).

    Folds are consecutive slices of one seeded permutation, so the training
    order for any held-out fold is already shuffled and fraction prefixes
    are nested.
    """

    n: int
    k_folds: int
    seed: int
    folds: list[np.ndarray]

    def test_indices(self, fold_index: int) -> np.ndarray:
        return self.folds[fold_index]

    def train_order(self, fold_index: int) -> np.ndarray:
        """All indices outside the held-out fold, in shuffled order."""
        if not 0 <= fold_index < self.k_folds:
            raise ValidationError(f"fold index {fold_index} out of range")
        parts = [f for i, f in enumerate(self.folds) if i != fold_index]
        return np.concatenate(parts)


def make_folds(n: int, k_folds: int, seed: int) -> FoldPlan:
    """Partition 0..n-1 into k shuffled folds with sizes differing by <= 1."""
    if not 2 <= k_folds <= n:
        raise ValidationError(f"k_folds must satisfy 2 <= k_folds <= n, got {k_folds} for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k_folds)
    folds = []
    start = 0
    for i in range(k_folds):
        size = base + (1 if i < extra else 0)
        folds.append(perm[start : start + size])
        start += size
    return FoldPlan(n=n, k_folds=k_folds, seed=seed, folds=folds)


def training_prefix(train_indices: Sequence[int] | np.ndarray, fraction: float) -> np.ndarray:
    """First ceil(fraction * len) indices of an already shuffled train order.

    Prefixes are nested: the 20% prefix contains the 10% prefix. The ceiling
    is taken over the exact rational value of ``fraction`` so binary float
    noise cannot change the count.
    """
    order = np.asarray(train_indices)
    if order.size == 0:
        raise ValidationError("training index list is empty")
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    count = math.ceil(Fraction(fraction) * order.size)
    return order[:count]


def top_k_accuracy(candidates: list[CandidateList], gold: GoldAlignment, k: int) -> float:
    """Fraction of queries whose gold target index is among the first k
    candidates. Exact index equality only: a duplicate sentence at another
    index counts as a miss."""
    if not candidates:
        raise ValidationError("no candidate lists to evaluate")
    if k < 1:
        raise ValidationError(f"k must be positive, got {k}")
    hits = 0
    for cl in candidates:
        if len(cl.candidates) < k:
            raise ValidationError(
                f"query {cl.query_index} has only {len(cl.candidates)} candidates, need {k}"
            )
        if cl.query_index not in gold:
            raise ValidationError(f"gold alignment undefined for query {cl.query_index}")
        want = gold[cl.query_index]
        if any(t == want for t, _ in cl.candidates[:k]):
            hits += 1
    return hits / len(candidates)


def _f1(precision: float | None, recall: float) -> float:
    if precision is None or precision + recall == 0.0:
        return 0.0
    if precision == recall:
        # harmonic mean of equal values, kept exact
        return precision
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f1(
    alignment: AlignmentResult, gold: GoldAlignment
) -> tuple[float | None, float, float]:
    """(precision, recall, f1) of the chosen pairs against gold.

    precision = correct / |pairs| (None when there are no pairs),
    recall = correct / |gold|.
    """
    if len(gold) == 0:
        raise ValidationError("gold alignment is empty")
    for q, _, _ in alignment.pairs:
        if q not in gold:
            raise ValidationError(f"gold alignment undefined for query {q}")
    correct = sum(1 for q, t, _ in alignment.pairs if gold[q] == t)
    precision = correct / len(alignment.pairs) if alignment.pairs else None
    recall = correct / len(gold)
    return precision, recall, _f1(precision, recall)


def threshold_curve(
    alignment: AlignmentResult,
    gold: GoldAlignment,
    thresholds: Sequence[float | None] | None = None,
) -> list[ThresholdRow]:
    """Re-filter an unthresholded cosine alignment at each grid value.

    A pair survives a threshold t when its score is >= t; None keeps all
    pairs. Rows come back in grid order.
    """
    if alignment.metric is not Metric.COSINE:
        raise ValidationError("threshold curves are only defined for the cosine metric")
    if alignment.threshold is not None:
        raise ValidationError("threshold curves need an unfiltered alignment")
    if len(gold) == 0:
        raise ValidationError("gold alignment is empty")
    grid = default_threshold_grid() if thresholds is None else list(thresholds)

    for q, _, _ in alignment.pairs:
        if q not in gold:
            raise ValidationError(f"gold alignment undefined for query {q}")
    scores = np.array([s for _, _, s in alignment.pairs])
    correct = np.array([gold[q] == t for q, t, _ in alignment.pairs], dtype=bool)

    rows = []
    for t in grid:
        keep = np.ones(len(scores), dtype=bool) if t is None else scores >= t
        n_kept = int(keep.sum())
        n_correct = int(correct[keep].sum())
        precision = n_correct / n_kept if n_kept else None
        recall = n_correct / len(gold)
        rows.append(
            ThresholdRow(
                threshold=t,
                precision=precision,
                recall=recall,
                f1=_f1(precision, recall),
                aligned_count=n_kept,
            )
        )
    return rows


def evaluate(
    candidates: list[CandidateList],
    gold: GoldAlignment,
    k_list: Sequence[int] = (1, 3),
    thresholds: Sequence[float | None] | None = None,
    metric: Metric = Metric.COSINE,
) -> EvalReport:
    """Top-k accuracies plus, for cosine candidates, the threshold curve."""
    accs = {k: top_k_accuracy(candidates, gold, k) for k in k_list}
    rows: list[ThresholdRow] = []
    if metric is Metric.COSINE:
        pairs = [(cl.query_index, cl.candidates[0][0], cl.candidates[0][1]) for cl in candidates]
        unfiltered = AlignmentResult(
            pairs=pairs,
            metric=metric,
            threshold=None,
            k=len(candidates[0].candidates) if candidates else 0,
            candidate_lists=candidates,
        )
        rows = threshold_curve(unfiltered, gold, thresholds)
    return EvalReport(top_k_accuracy=accs, threshold_rows=rows, n_queries=len(candidates))
