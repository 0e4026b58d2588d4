"""On-disk formats: sentence corpora, embedding matrices, gold alignments.

Embedding files use the self-describing EMB1 layout:

    magic "EMB1" | u32 LE dim | u64 LE count | count*dim float32 LE, row-major

A header-less raw float32 import mode covers existing embedding dumps where
the dimensionality is supplied by the caller. Loaded objects are immutable
value types and safe to share across threads.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

log = logging.getLogger(__name__)

EMB1_MAGIC = b"EMB1"
_EMB1_HEADER = struct.Struct("<4sIQ")  # magic, dim, count


@dataclass(frozen=True)
class SentenceCorpus:
    """An ordered list of sentences. The position of a sentence is its
    identity for alignment purposes and must stay in file order."""

    sentences: list[str]
    language_tag: str = ""
    empty_line_count: int = 0

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class GoldAlignment:
    """Ground-truth source index -> target index mapping."""

    mapping: dict[int, int] = field(default_factory=dict)

    @classmethod
    def identity(cls, n: int) -> "GoldAlignment":
        if n < 0:
            raise ValidationError("identity gold needs a non-negative size")
        return cls({i: i for i in range(n)})

    @classmethod
    def from_tsv(cls, path: str | Path) -> "GoldAlignment":
        """Two base-10 integer columns (source_index, target_index), no header."""
        mapping: dict[int, int] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}: line {lineno}: expected 2 tab-separated columns")
            try:
                src, tgt = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: non-integer index") from exc
            if src in mapping:
                raise FormatError(f"{path}: line {lineno}: duplicate source index {src}")
            mapping[src] = tgt
        return cls(mapping)

    def __len__(self) -> int:
        return len(self.mapping)

    def __getitem__(self, source_index: int) -> int:
        return self.mapping[source_index]

    def __contains__(self, source_index: int) -> bool:
        return source_index in self.mapping


def load_sentences(path: str | Path, language_tag: str = "") -> SentenceCorpus:
    """Read a UTF-8 file with one sentence per line (LF or CRLF).

    Trailing whitespace is stripped. Empty lines are kept as empty sentences
    (to preserve index parity with embedding files) and counted in
    ``empty_line_count`` with a logged warning.
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline, not an empty sentence
    sentences = []
    empty = 0
    for lineno, line in enumerate(lines):
        sentence = line.rstrip()
        if "\r" in sentence:
            raise FormatError(f"{path}: line {lineno}: stray carriage return inside line")
        if not sentence:
            empty += 1
        sentences.append(sentence)
    if empty:
        log.warning("%s: %d empty line(s) kept as empty sentences", path, empty)
    return SentenceCorpus(sentences, language_tag=language_tag, empty_line_count=empty)


def _check_finite(data: np.ndarray, path: str | Path) -> None:
    finite_rows = np.isfinite(data).all(axis=1)
    if not finite_rows.all():
        row = int(np.flatnonzero(~finite_rows)[0])
        raise FormatError(f"{path}: non-finite value at row {row}")


def load_embeddings(
    path: str | Path,
    fmt: str = "emb1",
    dim: int | None = None,
) -> np.ndarray:
    """Load an embedding matrix as a (count, dim) float32 array.

    fmt "emb1" reads the self-describing format; ``dim``, when given, is
    cross-checked against the header. fmt "raw_f32" reads a header-less
    little-endian float32 dump and requires ``dim``.
    """
    raw = Path(path).read_bytes()
    if fmt == "emb1":
        if len(raw) < _EMB1_HEADER.size:
            raise FormatError(f"{path}: file shorter than the EMB1 header")
        magic, file_dim, count = _EMB1_HEADER.unpack_from(raw)
        if magic != EMB1_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {EMB1_MAGIC!r}")
        if file_dim < 1:
            raise FormatError(f"{path}: dim must be positive, got {file_dim}")
        if dim is not None and dim != file_dim:
            raise FormatError(f"{path}: header dim {file_dim} does not match expected dim {dim}")
        payload = raw[_EMB1_HEADER.size :]
        expected = count * file_dim * 4
        if len(payload) != expected:
            raise FormatError(
                f"{path}: payload is {len(payload)} bytes, expected {expected} "
                f"for {count} x {file_dim} float32"
            )
        data = np.frombuffer(payload, dtype="<f4").reshape(count, file_dim)
    elif fmt == "raw_f32":
        if dim is None or dim < 1:
            raise ValidationError("raw_f32 loading requires a positive dim")
        if len(raw) % (4 * dim) != 0:
            raise FormatError(
                f"{path}: {len(raw)} bytes is not a multiple of {4 * dim} (4 * dim)"
            )
        data = np.frombuffer(raw, dtype="<f4").reshape(-1, dim)
    else:
        raise ValidationError(f"unknown embedding format {fmt!r}")

    data = np.ascontiguousarray(data, dtype=np.float32)
    _check_finite(data, path)
    return data


def save_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """Write a (count, dim) float32 matrix in the EMB1 format.

    Round-trips bit-exactly: load_embeddings(save_embeddings(m)) == m.
    """
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValidationError(f"embedding matrix must be 2-D, got shape {m.shape}")
    if m.shape[1] < 1:
        raise ValidationError("embedding dim must be positive")
    m32 = np.ascontiguousarray(m, dtype="<f4")
    _check_finite(m32, path)
    with open(path, "wb") as fh:
        fh.write(_EMB1_HEADER.pack(EMB1_MAGIC, m.shape[1], m.shape[0]))
        fh.write(m32.tobytes())


def check_parallel_counts(n_sentences: int, n_embeddings: int, what: str = "corpus") -> None:
    """Refuse a (sentences, embeddings) pair whose counts disagree."""
    if n_sentences != n_embeddings:
        raise ValidationError(
            f"{what}: sentence count {n_sentences} does not match embedding count {n_embeddings}"
        )
