"""Command-line entry point: ``embextract extract``.

Exit codes mirror the convention of the alignment toolkit this feeds into:

* 0 — success;
* 1 — runtime failure (model would not load, a batch failed to encode,
  the backend returned the wrong number of rows);
* 2 — invalid usage or input (unknown model, missing or non-UTF-8 input
  file, bad batch size), including argparse's own usage errors.
"""

from __future__ import annotations

import argparse
import sys

from .backends import MODEL_DIMS
from .errors import InputError
from .extract import ExtractorJob, extract

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embextract",
        description="Extract sentence embeddings into EMB1 files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser(
        "extract",
        help="embed one sentence-per-line text file into an EMB1 container",
    )
    ex.add_argument(
        "--model",
        required=True,
        help=f"embedding model name (bundled: {', '.join(sorted(MODEL_DIMS))})",
    )
    ex.add_argument("--in", dest="input_path", required=True, metavar="SENTENCES",
                    help="input text file, one sentence per line, UTF-8")
    ex.add_argument("--out", dest="output_path", required=True, metavar="EMB1",
                    help="output embedding file (EMB1 format)")
    ex.add_argument("--batch-size", type=int, default=32,
                    help="sentences encoded per model call (default: 32)")
    ex.add_argument("--device", default=None,
                    help="compute device hint passed to the backend (e.g. cpu)")
    ex.add_argument("--lang", default="en",
                    help="language hint for backends that need one (default: en)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        job = ExtractorJob(
            model=args.model,
            input_path=args.input_path,
            output_path=args.output_path,
            batch_size=args.batch_size,
            device=args.device,
            lang=args.lang,
        )
        metadata = extract(job)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(
        f"wrote {metadata['count']} embeddings "
        f"(dim {metadata['dim']}, model {metadata['model']}) "
        f"to {args.output_path}"
    )
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
