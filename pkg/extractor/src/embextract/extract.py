"""Turn a sentence file into an EMB1 embedding file, batch by batch.

The pipeline reads one UTF-8 sentence per line, encodes the lines in
fixed-size batches, and streams each batch straight into the output
container.  Two invariants are enforced rather than assumed:

* the output holds exactly one row per input line, in input order — a
  backend returning the wrong number of rows for any batch aborts the run
  and removes the partial output;
* every row has the width the model is documented to produce.

Alongside the embeddings a small JSON sidecar (``<output>.meta.json``)
records which model and checkpoint produced the file, so the provenance of
an embedding dump survives being copied around.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .backends import Encoder, get_encoder
from .errors import CountMismatchError, InputError, ModelError
from .writer import Emb1Writer

__all__ = ["ExtractorJob", "extract", "read_sentences"]


@dataclass(frozen=True)
class ExtractorJob:
    """What to extract: model name, input/output paths, and batching."""

    model: str
    input_path: str
    output_path: str
    batch_size: int = 32
    device: str | None = None
    lang: str = "en"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise InputError(f"batch size must be at least 1, got {self.batch_size}")


def read_sentences(path: str | Path) -> list[str]:
    """Read one sentence per line, preserving order and duplicates."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc
    return text.splitlines()


def _sidecar_path(output_path: str | Path) -> Path:
    return Path(str(output_path) + ".meta.json")


def extract(job: ExtractorJob, encoder: Encoder | None = None) -> dict:
    """Run one extraction job; return the metadata written to the sidecar.

    ``encoder`` is normally resolved from ``job.model``; passing one
    explicitly lets callers reuse a loaded model across jobs.
    """
    sentences = read_sentences(job.input_path)
    if encoder is None:
        encoder = get_encoder(job.model, device=job.device, lang=job.lang)

    with Emb1Writer(job.output_path, dim=encoder.dim) as writer:
        for start in range(0, len(sentences), job.batch_size):
            batch = sentences[start : start + job.batch_size]
            try:
                rows = encoder.encode(batch)
            except MemoryError as exc:
                raise ModelError(
                    f"ran out of memory encoding {len(batch)} sentences at line "
                    f"{start + 1}; retry with a smaller --batch-size "
                    f"(current: {job.batch_size})"
                ) from exc
            except (InputError, ModelError, CountMismatchError):
                raise
            except Exception as exc:
                raise ModelError(
                    f"model {job.model!r} failed on the batch starting at line "
                    f"{start + 1}: {exc}"
                ) from exc

            if rows.ndim != 2 or rows.shape[1] != encoder.dim:
                raise ModelError(
                    f"model {job.model!r} returned shape {rows.shape}, expected "
                    f"({len(batch)}, {encoder.dim})"
                )
            if rows.shape[0] != len(batch):
                raise CountMismatchError(
                    f"model returned {rows.shape[0]} rows for a batch of "
                    f"{len(batch)} sentences (starting at line {start + 1})"
                )
            writer.write(rows)

        if writer.count != len(sentences):
            raise CountMismatchError(
                f"output holds {writer.count} rows for {len(sentences)} input lines"
            )

    metadata = {
        "model": job.model,
        "checkpoint": encoder.checkpoint,
        "dim": encoder.dim,
        "count": len(sentences),
        "batch_size": job.batch_size,
    }
    _sidecar_path(job.output_path).write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return metadata
