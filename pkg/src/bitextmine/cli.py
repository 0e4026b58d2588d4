"""Command-line surface for alignment, evaluation, fine-tuning, and sweeps.

Exit codes are a stable scripting contract: 0 on success, 1 on runtime
failures, 2 on validation failures (bad inputs, format violations, argparse
errors). Global flags (--seed, --threads, --format, -v) go before the
subcommand. Every JSON summary embeds the effective configuration and its
hash, so artifacts are traceable to the run that produced them.

Threshold flags use the number line: thresholds live in [-1, 1] for cosine
scores, and the sentinel -0.2 (an impossible cutoff for near-duplicate text)
means "no threshold".
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from .adapter import (
    TrainConfig,
    apply as apply_adapter,
    init_adapter,
    load_adapter,
    save_adapter,
    train,
)
from .aligner import (
    AlignmentResult,
    CandidateList,
    align,
    load_alignment_tsv,
    load_candidates_tsv,
    save_alignment_tsv,
    save_candidates_tsv,
)
from .corpus_io import GoldAlignment, load_embeddings, save_embeddings
from .errors import ValidationError
from .evaluation import (
    EvalReport,
    default_threshold_grid,
    evaluate,
    number_to_threshold,
    threshold_curve,
    threshold_to_number,
    top_k_accuracy,
)
from .experiments import (
    ExperimentPlan,
    load_plan,
    run_sweep,
    write_sweep_csv,
    write_sweep_summary,
)
from .similarity import Metric

log = logging.getLogger(__name__)

_METRIC_NAMES = {"cosine": Metric.COSINE, "l2": Metric.EUCLIDEAN, "euclidean": Metric.EUCLIDEAN}

EVAL_COLUMNS = ["measure", "parameter", "accuracy", "precision", "recall", "f1", "aligned_count"]
CURVE_COLUMNS = ["threshold", "precision", "recall", "f1", "aligned_count"]


def _parse_metric(name: str) -> Metric:
    if name not in _METRIC_NAMES:
        raise ValidationError(f"unknown metric {name!r}; use cosine or l2")
    return _METRIC_NAMES[name]


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated integer list, got {text!r}") from exc


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated number list, got {text!r}") from exc


def _parse_threshold_list(text: str) -> tuple[float | None, ...]:
    return tuple(number_to_threshold(v) for v in _parse_float_list(text))


def _parse_gold(spec: str, default_n: int | None = None) -> GoldAlignment:
    """Gold spec: a TSV path, "identity" (size inferred when possible), or
    "identity:N"."""
    if spec == "identity":
        if default_n is None:
            raise ValidationError("this command cannot infer the identity size; use identity:N")
        return GoldAlignment.identity(default_n)
    if spec.startswith("identity:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad gold spec {spec!r}") from exc
        return GoldAlignment.identity(n)
    return GoldAlignment.from_tsv(spec)


def _load_matrix(path: str, fmt: str, dim: int | None):
    if fmt == "raw_f32" and dim is None:
        raise ValidationError("raw_f32 input needs an explicit --*-dim")
    return load_embeddings(path, fmt=fmt, dim=dim)


def _config_payload(command: str, config: dict) -> dict:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return {
        "command": command,
        "plan_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seed": config.get("seed"),
        "plan": config,
    }


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_csv(path: str, columns: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _report_rows(report: EvalReport, k_values) -> list[list[str]]:
    rows = []
    for k in k_values:
        rows.append(["top_k", str(k), _fmt(report.top_k_accuracy[k]), "", "", "", ""])
    for tr in report.threshold_rows:
        rows.append(
            [
                "threshold",
                repr(threshold_to_number(tr.threshold)),
                "",
                "n/a" if tr.precision is None else _fmt(tr.precision),
                _fmt(tr.recall),
                _fmt(tr.f1),
                str(tr.aligned_count),
            ]
        )
    return rows


def _threshold_rows_json(rows) -> list[dict]:
    return [
        {
            "threshold": threshold_to_number(tr.threshold),
            "precision": tr.precision,
            "recall": tr.recall,
            "f1": tr.f1,
            "aligned_count": tr.aligned_count,
        }
        for tr in rows
    ]


def cmd_align(args) -> dict:
    metric = _parse_metric(args.metric)
    threshold = None if args.threshold is None else number_to_threshold(args.threshold)
    queries = _load_matrix(args.source, args.source_format, args.source_dim)
    targets = _load_matrix(args.target, args.target_format, args.target_dim)
    result = align(queries, targets, metric, threshold=threshold, k=args.k)
    save_alignment_tsv(result, args.out)
    if args.candidates_out:
        save_candidates_tsv(result.candidate_lists, args.candidates_out)

    config = {
        "command": "align",
        "source": args.source,
        "target": args.target,
        "metric": metric.value,
        "threshold": threshold_to_number(threshold),
        "k": args.k,
        "seed": args.seed,
    }
    payload = _config_payload("align", config)
    payload.update(
        n_queries=queries.shape[0],
        n_targets=targets.shape[0],
        dim=queries.shape[1],
        pairs=len(result.pairs),
        out=args.out,
    )
    if args.gold:
        gold = _parse_gold(args.gold, default_n=queries.shape[0])
        payload["top_1_accuracy"] = top_k_accuracy(result.candidate_lists, gold, 1)
    if args.summary:
        _write_json(args.summary, payload)
    return payload


def _candidates_from_args(args) -> list[CandidateList]:
    if bool(args.candidates) == bool(args.alignment):
        raise ValidationError("provide exactly one of --candidates or --alignment")
    if args.candidates:
        return load_candidates_tsv(args.candidates)
    pairs = load_alignment_tsv(args.alignment)
    return [CandidateList(q, [(t, s)]) for q, t, s in pairs]


def cmd_eval(args) -> dict:
    candidates = _candidates_from_args(args)
    gold = _parse_gold(args.gold)
    metric = _parse_metric(args.metric)
    depth = min((len(cl.candidates) for cl in candidates), default=0)
    if args.k is not None:
        k_values = _parse_int_list(args.k)
    else:
        k_values = tuple(k for k in (1, 3) if k <= depth) or (1,)
    thresholds = (
        _parse_threshold_list(args.thresholds) if args.thresholds else default_threshold_grid()
    )
    report = evaluate(candidates, gold, k_list=k_values, thresholds=thresholds, metric=metric)

    if args.out:
        _write_csv(args.out, EVAL_COLUMNS, _report_rows(report, k_values))
    config = {
        "command": "eval",
        "candidates": args.candidates,
        "alignment": args.alignment,
        "gold": args.gold,
        "metric": metric.value,
        "k_values": list(k_values),
        "thresholds": [threshold_to_number(t) for t in thresholds],
        "seed": args.seed,
    }
    payload = _config_payload("eval", config)
    payload.update(
        n_queries=report.n_queries,
        top_k_accuracy={str(k): v for k, v in report.top_k_accuracy.items()},
        thresholds=_threshold_rows_json(report.threshold_rows),
    )
    if args.summary:
        _write_json(args.summary, payload)
    return payload


def cmd_curve(args) -> dict:
    pairs = load_alignment_tsv(args.alignment)
    gold = _parse_gold(args.gold)
    lists = [CandidateList(q, [(t, s)]) for q, t, s in pairs]
    unfiltered = AlignmentResult(
        pairs=pairs, metric=Metric.COSINE, threshold=None, k=1, candidate_lists=lists
    )
    thresholds = (
        _parse_threshold_list(args.thresholds) if args.thresholds else default_threshold_grid()
    )
    rows = threshold_curve(unfiltered, gold, thresholds)
    if args.out:
        _write_csv(
            args.out,
            CURVE_COLUMNS,
            [
                [
                    repr(threshold_to_number(tr.threshold)),
                    "n/a" if tr.precision is None else _fmt(tr.precision),
                    _fmt(tr.recall),
                    _fmt(tr.f1),
                    str(tr.aligned_count),
                ]
                for tr in rows
            ],
        )
    config = {
        "command": "curve",
        "alignment": args.alignment,
        "gold": args.gold,
        "thresholds": [threshold_to_number(t) for t in thresholds],
        "seed": args.seed,
    }
    payload = _config_payload("curve", config)
    payload.update(n_pairs=len(pairs), rows=_threshold_rows_json(rows))
    if args.summary:
        _write_json(args.summary, payload)
    return payload


def cmd_finetune(args) -> dict:
    seed = args.seed if args.seed is not None else 0
    source = _load_matrix(args.source, args.source_format, args.source_dim)
    target = _load_matrix(args.target, args.target_format, args.target_dim)
    model = init_adapter(source.shape[1], args.hidden, args.activation, seed=seed)
    config_obj = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=seed,
        optimizer=args.optimizer,
    )
    trained, history = train(model, source, target, config_obj)
    save_adapter(trained, args.out)
    if args.history:
        _write_csv(
            args.history,
            ["epoch", "loss"],
            [[str(i), repr(loss)] for i, loss in enumerate(history.epoch_losses, 1)],
        )

    config = {
        "command": "finetune",
        "source": args.source,
        "target": args.target,
        "hidden": args.hidden,
        "activation": args.activation,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "optimizer": args.optimizer,
        "seed": seed,
    }
    payload = _config_payload("finetune", config)
    payload.update(
        n_pairs=source.shape[0],
        dim=source.shape[1],
        parameter_count=trained.parameter_count,
        final_loss=history.final_loss,
        checkpoint=args.out,
        checkpoint_bytes=Path(args.out).stat().st_size,
    )
    if args.summary:
        _write_json(args.summary, payload)
    return payload


def cmd_apply(args) -> dict:
    model = load_adapter(args.model)
    matrix = _load_matrix(args.input, args.input_format, args.input_dim)
    transformed = apply_adapter(model, matrix)
    save_embeddings(transformed, args.out)
    config = {
        "command": "apply",
        "model": args.model,
        "input": args.input,
        "seed": args.seed,
    }
    payload = _config_payload("apply", config)
    payload.update(
        n_rows=transformed.shape[0], dim=transformed.shape[1], hidden=model.h, out=args.out
    )
    if args.summary:
        _write_json(args.summary, payload)
    return payload


def cmd_sweep(args) -> dict:
    plan = load_plan(args.plan) if args.plan else ExperimentPlan()
    overrides = {}
    for name in ("source", "target", "gold", "metric", "activation"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    for name in ("k_folds", "epochs", "batch_size"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.learning_rate is not None:
        overrides["learning_rate"] = args.learning_rate
    if args.fractions is not None:
        overrides["fractions"] = _parse_float_list(args.fractions)
    if args.hidden_sizes is not None:
        overrides["hidden_sizes"] = _parse_int_list(args.hidden_sizes)
    if args.k is not None:
        overrides["k_values"] = _parse_int_list(args.k)
    if args.thresholds is not None:
        overrides["thresholds"] = _parse_threshold_list(args.thresholds)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        plan = dataclasses.replace(plan, **overrides)

    if not plan.source or not plan.target:
        raise ValidationError("sweep needs source and target paths (plan file or flags)")
    source = load_embeddings(plan.source)
    target = load_embeddings(plan.target)
    gold = None if plan.gold == "identity" else _parse_gold(plan.gold, source.shape[0])
    result = run_sweep(source, target, plan, gold=gold, threads=args.threads)
    write_sweep_csv(result, args.csv_out)
    write_sweep_summary(result, args.summary_out)
    return {
        "command": "sweep",
        "plan_hash": plan.plan_hash(),
        "seed": plan.seed,
        "cells": len(result.cells),
        "csv": args.csv_out,
        "summary": args.summary_out,
        "plan": plan.to_dict(),
    }


def _add_matrix_flags(parser, side: str) -> None:
    parser.add_argument(f"--{side}-format", choices=["emb1", "raw_f32"], default="emb1")
    parser.add_argument(f"--{side}-dim", type=int, default=None, help="dim for raw_f32 input")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitextmine",
        description="Bitext mining over sentence embeddings: exhaustive nearest-neighbor "
        "alignment, top-k/threshold evaluation, and bottleneck-adapter fine-tuning.",
    )
    parser.add_argument("--seed", type=int, default=None, help="seed for seeded commands")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument(
        "--format", choices=["text", "json"], default="text", help="stdout format"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("align", help="align source sentences to their nearest targets")
    p.add_argument("--source", required=True, help="source embeddings (queries)")
    p.add_argument("--target", required=True, help="target embeddings (search pool)")
    _add_matrix_flags(p, "source")
    _add_matrix_flags(p, "target")
    p.add_argument("--metric", default="cosine", help="cosine (default) or l2")
    p.add_argument(
        "--threshold",
        type=float,
        default=None,
        help="keep only cosine scores >= this; -0.2 means no threshold",
    )
    p.add_argument("--k", type=int, default=1, help="candidates retained per query")
    p.add_argument("--out", required=True, help="alignment TSV output")
    p.add_argument("--candidates-out", default=None, help="optional candidate TSV output")
    p.add_argument("--gold", default=None, help="TSV path, identity, or identity:N")
    p.add_argument("--summary", default=None, help="optional JSON summary output")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="top-k accuracy and threshold curve for saved results")
    p.add_argument("--candidates", default=None, help="candidates TSV from align")
    p.add_argument("--alignment", default=None, help="alignment TSV from align (top-1 only)")
    p.add_argument("--gold", required=True, help="TSV path, identity:N")
    p.add_argument("--metric", default="cosine", help="metric the scores came from")
    p.add_argument("--k", default=None, help="comma list of k values (default: 1,3 as depth allows)")
    p.add_argument("--thresholds", default=None, help="comma list; -0.2 means no threshold")
    p.add_argument("--out", default=None, help="report CSV output")
    p.add_argument("--summary", default=None, help="optional JSON summary output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="precision/recall/F1 across a threshold grid")
    p.add_argument("--alignment", required=True, help="unfiltered cosine alignment TSV")
    p.add_argument("--gold", required=True, help="TSV path, identity:N")
    p.add_argument("--thresholds", default=None, help="comma list; -0.2 means no threshold")
    p.add_argument("--out", default=None, help="curve CSV output")
    p.add_argument("--summary", default=None, help="optional JSON summary output")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("finetune", help="train a bottleneck adapter on parallel embeddings")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    _add_matrix_flags(p, "source")
    _add_matrix_flags(p, "target")
    p.add_argument("--hidden", type=int, required=True, help="bottleneck width")
    p.add_argument("--activation", choices=["relu", "identity"], default="relu")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--out", required=True, help="ADP1 checkpoint output")
    p.add_argument("--history", default=None, help="per-epoch loss CSV output")
    p.add_argument("--summary", default=None, help="optional JSON summary output")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("apply", help="run embeddings through a saved adapter")
    p.add_argument("--model", required=True, help="ADP1 checkpoint")
    p.add_argument("--in", dest="input", required=True, help="input embeddings")
    p.add_argument("--in-format", dest="input_format", choices=["emb1", "raw_f32"], default="emb1")
    p.add_argument("--in-dim", dest="input_dim", type=int, default=None)
    p.add_argument("--out", required=True, help="transformed EMB1 output")
    p.add_argument("--summary", default=None, help="optional JSON summary output")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("sweep", help="cross-validated fraction x hidden-size fine-tuning grid")
    p.add_argument("--plan", default=None, help="JSON plan file; flags override its fields")
    p.add_argument("--source", default=None, help="source EMB1 path")
    p.add_argument("--target", default=None, help="target EMB1 path")
    p.add_argument("--gold", default=None, help="TSV path or identity")
    p.add_argument("--metric", default=None)
    p.add_argument("--k-folds", dest="k_folds", type=int, default=None)
    p.add_argument("--fractions", default=None, help="comma list of training fractions")
    p.add_argument("--hidden-sizes", dest="hidden_sizes", default=None, help="comma list")
    p.add_argument("--k", default=None, help="comma list of k values")
    p.add_argument("--thresholds", default=None, help="comma list; -0.2 means no threshold")
    p.add_argument("--activation", choices=["relu", "identity"], default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--csv-out", required=True, help="long-format CSV output")
    p.add_argument("--summary-out", required=True, help="JSON summary output")
    p.set_defaults(func=cmd_sweep)

    return parser


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    for key, value in payload.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        print(f"{key}: {value}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        payload = args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # CLI boundary: report, do not traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args.format)
    return 0


if __name__ == "__main__":
    sys.exit(main())
