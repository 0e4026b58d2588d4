"""Vector-space primitives: cosine similarity, Euclidean distance, row
normalization, and full pairwise score matrices.

All reductions accumulate in 64-bit floats regardless of input dtype. The
matrix kernels use ``np.einsum(..., optimize=False)``, whose per-element
accumulation order over the feature axis is fixed, so blocked results are
bitwise identical for every block size. (BLAS matmul does not give that
guarantee, which is why it is not used here.)
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import ValidationError, ZeroNormError

DEFAULT_BLOCK_ROWS = 256


class Metric(str, Enum):
    """Pairwise scoring metric. Cosine scores are similarities (higher is
    better); Euclidean scores are distances (lower is better)."""

    COSINE = "cosine"
    EUCLIDEAN = "euclidean"

    @property
    def higher_is_better(self) -> bool:
        return self is Metric.COSINE


def _as_matrix64(m, name: str) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array, got shape {a.shape}")
    return a.astype(np.float64, copy=False)


def _as_vector64(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ValidationError(f"{name} must be a 1-D vector, got shape {a.shape}")
    return a


def _check_same_dim(du: int, dv: int) -> None:
    if du != dv:
        raise ValidationError(f"dimension mismatch: {du} vs {dv}")


def squared_norms(m) -> np.ndarray:
    """Per-row squared L2 norms, accumulated in float64."""
    m64 = _as_matrix64(m, "matrix")
    return np.einsum("nd,nd->n", m64, m64, optimize=False)


def row_norms(m) -> np.ndarray:
    """Per-row L2 norms, accumulated in float64."""
    return np.sqrt(squared_norms(m))


def cosine_similarity(u, v) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1].

    Raises ZeroNormError for zero-norm input rather than returning NaN.
    """
    u64 = _as_vector64(u, "u")
    v64 = _as_vector64(v, "v")
    _check_same_dim(u64.shape[0], v64.shape[0])
    # Same einsum kernel as score_matrix so the 1x1 matrix case agrees exactly.
    return float(
        score_matrix(u64.reshape(1, -1), v64.reshape(1, -1), Metric.COSINE)[0, 0]
    )


def euclidean_distance(u, v) -> float:
    """Euclidean (L2) distance sqrt(sum((u_i - v_i)^2)) in 64-bit arithmetic."""
    u64 = _as_vector64(u, "u")
    v64 = _as_vector64(v, "v")
    _check_same_dim(u64.shape[0], v64.shape[0])
    diff = u64 - v64
    return float(np.sqrt(np.einsum("d,d->", diff, diff, optimize=False)))


def normalize_rows(m) -> np.ndarray:
    """Scale every row to unit L2 norm; returns a float32 matrix.

    Raises ZeroNormError naming the first zero-norm row.
    """
    m64 = _as_matrix64(m, "matrix")
    norms = row_norms(m64)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormError(f"row {zero[0]} has zero norm")
    return (m64 / norms[:, None]).astype(np.float32)


def _block_dots(q64: np.ndarray, t64: np.ndarray) -> np.ndarray:
    return np.einsum("qd,td->qt", q64, t64, optimize=False)


def score_matrix(
    queries,
    targets,
    metric: Metric,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> np.ndarray:
    """All pairwise scores as an (n_q, n_t) float64 array.

    Entry (i, j) is the metric applied to query row i and target row j.
    Queries are processed in blocks of ``block_rows`` to bound temporary
    memory; the result is bitwise independent of the block size.

    Euclidean entries are computed via the norm expansion
    ``|u-v|^2 = |u|^2 + |v|^2 - 2 u.v`` (clamped at 0 before the square
    root), which matches the direct per-pair formula to well within 1e-6.
    """
    q64 = _as_matrix64(queries, "queries")
    t64 = _as_matrix64(targets, "targets")
    _check_same_dim(q64.shape[1], t64.shape[1])
    if q64.shape[0] < 1 or t64.shape[0] < 1:
        raise ValidationError("queries and targets must each have at least one row")
    if block_rows < 1:
        raise ValidationError("block_rows must be positive")

    q_sq = squared_norms(q64)
    t_sq = squared_norms(t64)
    if metric is Metric.COSINE:
        for name, sq in (("query", q_sq), ("target", t_sq)):
            zero = np.flatnonzero(sq == 0.0)
            if zero.size:
                raise ZeroNormError(f"{name} row {zero[0]} has zero norm")

    out = np.empty((q64.shape[0], t64.shape[0]), dtype=np.float64)
    for start in range(0, q64.shape[0], block_rows):
        stop = min(start + block_rows, q64.shape[0])
        dots = _block_dots(q64[start:stop], t64)
        if metric is Metric.COSINE:
            # sqrt of the product (not product of sqrts): an identical query
            # and target row then divides u.u by exactly itself, making
            # self-similarity exactly 1.0.
            block = dots / np.sqrt(q_sq[start:stop, None] * t_sq[None, :])
            np.clip(block, -1.0, 1.0, out=block)
        else:
            block = q_sq[start:stop, None] + t_sq[None, :] - 2.0 * dots
            np.maximum(block, 0.0, out=block)
            np.sqrt(block, out=block)
        out[start:stop] = block
    return out
