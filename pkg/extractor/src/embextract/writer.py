"""Streaming writer for the EMB1 embedding container.

EMB1 is a 16-byte little-endian header — 4-byte magic ``b"EMB1"``, u32
embedding dimension, u64 row count — followed by ``count * dim`` float32
values in row-major order.

Batches are appended as they arrive, so the file never has to fit in memory
alongside the model.  The row count is not known up front; the header is
written with a provisional count of zero and the real value is patched in
at byte offset 8 when the writer closes.  If extraction fails midway, the
context manager removes the partial file rather than leaving behind a
container whose header lies about its payload.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import InputError

__all__ = ["EMB1_MAGIC", "Emb1Writer"]

EMB1_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sIQ")  # magic, dim, count
_COUNT_OFFSET = 8  # byte position of the u64 count field within the header


class Emb1Writer:
    """Write an EMB1 file incrementally, one batch of rows at a time."""

    def __init__(self, path: str | os.PathLike[str], dim: int):
        if dim <= 0:
            raise InputError(f"embedding dimension must be positive, got {dim}")
        self.path = Path(path)
        self.dim = int(dim)
        self.count = 0
        self._fh = open(self.path, "wb")
        self._closed = False
        self._fh.write(_HEADER.pack(EMB1_MAGIC, self.dim, 0))

    def write(self, batch: np.ndarray) -> None:
        """Append one batch of rows (a 2-D array of width ``dim``)."""
        if self._closed:
            raise InputError("writer is closed")
        rows = np.asarray(batch, dtype=np.float32)
        if rows.ndim != 2:
            raise InputError(f"batch must be 2-D, got shape {rows.shape}")
        if rows.shape[1] != self.dim:
            raise InputError(
                f"batch has dimension {rows.shape[1]}, writer expects {self.dim}"
            )
        if not np.all(np.isfinite(rows)):
            raise InputError("batch contains non-finite values")
        self._fh.write(np.ascontiguousarray(rows).tobytes())
        self.count += rows.shape[0]

    def close(self) -> None:
        """Patch the final row count into the header and close the file."""
        if self._closed:
            return
        self._fh.seek(_COUNT_OFFSET)
        self._fh.write(struct.pack("<Q", self.count))
        self._fh.close()
        self._closed = True

    def abort(self) -> None:
        """Close and delete the file; used when extraction fails midway."""
        if not self._closed:
            self._fh.close()
            self._closed = True
        self.path.unlink(missing_ok=True)

    def __enter__(self) -> "Emb1Writer":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self.abort()
