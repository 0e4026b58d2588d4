"""Exhaustive nearest-neighbor alignment with deterministic tie-breaking.

Every query is scored against every target; the k best candidates are kept
per query, best first. Exactly equal scores are broken by the lower target
index. Threshold filtering keeps only Top-1 pairs whose cosine similarity
reaches the cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .similarity import DEFAULT_BLOCK_ROWS, Metric, score_matrix


@dataclass(frozen=True)
class CandidateList:
    """Ranked alignment candidates for one query: (target_index, score),
    best first, ties broken by ascending target index."""

    query_index: int
    candidates: list[tuple[int, float]]


@dataclass(frozen=True)
class AlignmentResult:
    """Chosen Top-1 pairs after optional threshold filtering, plus the full
    candidate lists retained for Top-k evaluation."""

    pairs: list[tuple[int, int, float]]
    metric: Metric
    threshold: float | None
    k: int
    candidate_lists: list[CandidateList]


def top_k(
    queries,
    targets,
    metric: Metric,
    k: int,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> list[CandidateList]:
    """The k best targets for every query under the metric.

    The search is exhaustive. Sorting is stable on the score key, so equal
    scores fall back to ascending target index.
    """
    q = np.asarray(queries)
    t = np.asarray(targets)
    if q.ndim != 2 or t.ndim != 2:
        raise ValidationError("queries and targets must be 2-D matrices")
    n_t = t.shape[0]
    if k < 1:
        raise ValidationError(f"k must be positive, got {k}")
    if k > n_t:
        raise ValidationError(f"k={k} exceeds the number of targets ({n_t})")

    results: list[CandidateList] = []
    for start in range(0, q.shape[0], block_rows):
        stop = min(start + block_rows, q.shape[0])
        scores = score_matrix(q[start:stop], t, metric, block_rows=block_rows)
        key = -scores if metric.higher_is_better else scores
        order = np.argsort(key, axis=1, kind="stable")[:, :k]
        picked = np.take_along_axis(scores, order, axis=1)
        for i in range(stop - start):
            results.append(
                CandidateList(
                    query_index=start + i,
                    candidates=[
                        (int(order[i, j]), float(picked[i, j])) for j in range(k)
                    ],
                )
            )
    return results


def align(
    queries,
    targets,
    metric: Metric,
    threshold: float | None = None,
    k: int = 1,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> AlignmentResult:
    """Align each query to its best target, keeping pairs that pass the
    cosine threshold. With no threshold every query is paired.

    Thresholds are only meaningful for cosine similarity; supplying one with
    the Euclidean metric is rejected.
    """
    if threshold is not None and metric is not Metric.COSINE:
        raise ValidationError("threshold filtering is only supported for the cosine metric")
    lists = top_k(queries, targets, metric, k, block_rows=block_rows)
    pairs = []
    for cl in lists:
        target_index, score = cl.candidates[0]
        if threshold is None or score >= threshold:
            pairs.append((cl.query_index, target_index, score))
    return AlignmentResult(
        pairs=pairs, metric=metric, threshold=threshold, k=k, candidate_lists=lists
    )


def save_alignment_tsv(result: AlignmentResult, path: str | Path) -> None:
    """Write pairs as TSV: query_index, target_index, score (6 decimals)."""
    with open(path, "w", encoding="utf-8") as fh:
        for q, t, score in result.pairs:
            fh.write(f"{q}\t{t}\t{score:.6f}\n")


def load_alignment_tsv(path: str | Path) -> list[tuple[int, int, float]]:
    """Read pairs written by save_alignment_tsv."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected 3 tab-separated columns")
        try:
            pairs.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: malformed row") from exc
    return pairs


def save_candidates_tsv(lists: list[CandidateList], path: str | Path) -> None:
    """Write candidate lists as TSV: query_index, rank, target_index, score."""
    with open(path, "w", encoding="utf-8") as fh:
        for cl in lists:
            for rank, (t, score) in enumerate(cl.candidates):
                fh.write(f"{cl.query_index}\t{rank}\t{t}\t{score:.6f}\n")


def load_candidates_tsv(path: str | Path) -> list[CandidateList]:
    """Read candidate lists written by save_candidates_tsv."""
    by_query: dict[int, list[tuple[int, int, float]]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError(f"{path}: line {lineno}: expected 4 tab-separated columns")
        try:
            q, rank, t, score = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: malformed row") from exc
        by_query.setdefault(q, []).append((rank, t, score))
    lists = []
    for q in sorted(by_query):
        rows = sorted(by_query[q])
        if [r for r, _, _ in rows] != list(range(len(rows))):
            raise FormatError(f"{path}: query {q}: ranks are not contiguous from 0")
        lists.append(CandidateList(q, [(t, score) for _, t, score in rows]))
    return lists
