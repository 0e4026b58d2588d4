"""Cross-validated fine-tuning sweeps.

A sweep trains one adapter per (fold, training fraction, hidden size) cell
on a prefix of the fold's training split, then evaluates the transformed
held-out queries against the full target set. Outputs are a long-format CSV
(one row per cell and measure) and a JSON summary with per-cell numbers and
mean/std aggregates across folds. Neither file contains timestamps, so a
rerun of the same plan on the same data is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adapter import TrainConfig, apply as apply_adapter, init_adapter, train
from .aligner import top_k
from .corpus_io import GoldAlignment
from .errors import SweepCellError, ValidationError
from .evaluation import (
    EvalReport,
    FoldPlan,
    default_threshold_grid,
    evaluate,
    make_folds,
    number_to_threshold,
    threshold_to_number,
    training_prefix,
)
from .similarity import Metric

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "fold",
    "fraction",
    "hidden_size",
    "train_size",
    "measure",
    "parameter",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "aligned_count",
]


@dataclass(frozen=True)
class ExperimentPlan:
    """Full description of a sweep; a run is reproducible from the plan plus
    the input files, and the plan hashes to a stable identifier.

    ``gold`` is either the literal string "identity" (row i of the source is
    parallel to row i of the target) or a path to a two-column TSV of index
    pairs. ``thresholds`` may contain None (no cutoff), which serializes as
    the sentinel -0.2 since JSON has no way to tag it inside a numeric list.
    """

    source: str | None = None
    target: str | None = None
    gold: str = "identity"
    metric: str = "cosine"
    k_folds: int = 5
    seed: int = 0
    fractions: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    hidden_sizes: tuple[int, ...] = (32, 64, 96, 128, 256)
    k_values: tuple[int, ...] = (1, 3)
    thresholds: tuple[float | None, ...] = field(
        default_factory=lambda: tuple(default_threshold_grid())
    )
    activation: str = "relu"
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.metric not in ("cosine", "euclidean"):
            raise ValidationError(f"metric must be cosine or euclidean, got {self.metric!r}")
        if self.k_folds < 2:
            raise ValidationError("k_folds must be at least 2")
        if not self.fractions or not self.hidden_sizes or not self.k_values:
            raise ValidationError("fractions, hidden_sizes and k_values must be non-empty")
        for f in self.fractions:
            if not 0.0 < f <= 1.0:
                raise ValidationError(f"fractions must be in (0, 1], got {f}")
        for h in self.hidden_sizes:
            if h < 1:
                raise ValidationError(f"hidden sizes must be positive, got {h}")
        for k in self.k_values:
            if k < 1:
                raise ValidationError(f"k values must be positive, got {k}")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "gold": self.gold,
            "metric": self.metric,
            "k_folds": self.k_folds,
            "seed": self.seed,
            "fractions": list(self.fractions),
            "hidden_sizes": list(self.hidden_sizes),
            "k_values": list(self.k_values),
            "thresholds": [threshold_to_number(t) for t in self.thresholds],
            "activation": self.activation,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ValidationError(f"unknown plan fields: {sorted(unknown)}")
        for name in ("fractions", "hidden_sizes", "k_values"):
            if name in known:
                known[name] = tuple(known[name])
        if "thresholds" in known:
            known["thresholds"] = tuple(number_to_threshold(t) for t in known["thresholds"])
        return cls(**known)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def plan_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def save_plan(plan: ExperimentPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_plan(path: str | Path) -> ExperimentPlan:
    return ExperimentPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class CellResult:
    fold: int
    fraction: float
    hidden_size: int
    train_size: int
    final_loss: float
    report: EvalReport


@dataclass(frozen=True)
class SweepResult:
    plan: ExperimentPlan
    cells: list[CellResult]


def _cell_seeds(plan: ExperimentPlan, fold: int, frac_index: int, hidden_index: int):
    """Two independent seeds (init, shuffle) per cell, derived from the plan
    seed and the cell coordinates so cells never share randomness."""
    ss = np.random.SeedSequence([plan.seed, fold, frac_index, hidden_index])
    init_seed, shuffle_seed = (int(s) for s in ss.generate_state(2))
    return init_seed, shuffle_seed


def _run_cell(
    x: np.ndarray,
    y: np.ndarray,
    gold_targets: np.ndarray,
    plan: ExperimentPlan,
    folds: FoldPlan,
    fold: int,
    frac_index: int,
    hidden_index: int,
) -> CellResult:
    fraction = plan.fractions[frac_index]
    hidden = plan.hidden_sizes[hidden_index]
    metric = Metric(plan.metric)
    train_rows = training_prefix(folds.train_order(fold), fraction)
    test_rows = folds.test_indices(fold)

    init_seed, shuffle_seed = _cell_seeds(plan, fold, frac_index, hidden_index)
    model = init_adapter(x.shape[1], hidden, plan.activation, seed=init_seed)
    config = TrainConfig(
        learning_rate=plan.learning_rate,
        epochs=plan.epochs,
        batch_size=plan.batch_size,
        seed=shuffle_seed,
    )
    trained, history = train(model, x[train_rows], y[gold_targets[train_rows]], config)

    # Held-out queries are searched against the full target set, so the gold
    # target keeps its global index and every other row is a distractor.
    transformed = apply_adapter(trained, x[test_rows])
    candidates = top_k(transformed, y, metric, k=max(plan.k_values))
    gold = GoldAlignment({i: int(gold_targets[t]) for i, t in enumerate(test_rows)})
    report = evaluate(
        candidates, gold, k_list=plan.k_values, thresholds=plan.thresholds, metric=metric
    )

    log.info(
        "cell fold=%d fraction=%s hidden=%d: train_size=%d loss=%.4f top1=%.4f",
        fold,
        fraction,
        hidden,
        len(train_rows),
        history.final_loss,
        report.top_k_accuracy[min(plan.k_values)],
    )
    return CellResult(
        fold=fold,
        fraction=fraction,
        hidden_size=hidden,
        train_size=len(train_rows),
        final_loss=history.final_loss,
        report=report,
    )


def _gold_target_array(n_source: int, n_target: int, gold: GoldAlignment | None) -> np.ndarray:
    """Per-source-row gold target indices; identity when gold is None."""
    if gold is None:
        if n_source != n_target:
            raise ValidationError(
                f"identity gold needs equal corpus sizes, got {n_source} and {n_target}"
            )
        return np.arange(n_source)
    missing = [i for i in range(n_source) if i not in gold]
    if missing:
        raise ValidationError(f"gold alignment must cover every source row; row {missing[0]} is missing")
    if len(gold) != n_source:
        raise ValidationError("gold alignment maps source rows that do not exist")
    targets = np.array([gold[i] for i in range(n_source)])
    if targets.min() < 0 or targets.max() >= n_target:
        raise ValidationError("gold alignment points outside the target matrix")
    return targets


def run_sweep(
    source,
    target,
    plan: ExperimentPlan,
    gold: GoldAlignment | None = None,
    threads: int = 1,
) -> SweepResult:
    """Run every (fold, fraction, hidden size) cell of the plan.

    Cells are independent, so they may run on a thread pool; results are
    collected in plan order either way. A failing cell aborts the sweep with
    its coordinates attached.
    """
    x = np.asarray(source)
    y = np.asarray(target)
    if x.ndim != 2 or y.ndim != 2:
        raise ValidationError("sweep needs 2-D source and target matrices")
    if x.shape[1] != y.shape[1]:
        raise ValidationError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if threads < 1:
        raise ValidationError("threads must be positive")
    gold_targets = _gold_target_array(x.shape[0], y.shape[0], gold)
    folds = make_folds(x.shape[0], plan.k_folds, plan.seed)
    coords = [
        (fold, fi, hi)
        for fold in range(plan.k_folds)
        for fi in range(len(plan.fractions))
        for hi in range(len(plan.hidden_sizes))
    ]

    def cell(coord):
        fold, fi, hi = coord
        try:
            return _run_cell(x, y, gold_targets, plan, folds, fold, fi, hi)
        except Exception as exc:
            raise SweepCellError(fold, plan.fractions[fi], plan.hidden_sizes[hi], exc) from exc

    if threads == 1:
        cells = [cell(c) for c in coords]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(cell, c) for c in coords]
            cells = [f.result() for f in futures]
    return SweepResult(plan=plan, cells=cells)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def sweep_rows(result: SweepResult) -> list[list[str]]:
    """Long-format rows: per cell, one row per k and one per threshold."""
    rows = []
    for cell in result.cells:
        prefix = [str(cell.fold), repr(cell.fraction), str(cell.hidden_size), str(cell.train_size)]
        for k in result.plan.k_values:
            rows.append(
                prefix + ["top_k", str(k), _fmt(cell.report.top_k_accuracy[k]), "", "", "", ""]
            )
        for tr in cell.report.threshold_rows:
            rows.append(
                prefix
                + [
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


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(sweep_rows(result))


def _aggregate(values: list[float | None]) -> dict:
    defined = [v for v in values if v is not None]
    if not defined:
        return {"mean": None, "std": None, "n_folds": 0}
    arr = np.array(defined)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n_folds": len(defined)}


def sweep_summary(result: SweepResult) -> dict:
    """Per-cell numbers plus mean/std (population) across folds for every
    (fraction, hidden size, measure) combination."""
    plan = result.plan
    cells_json = []
    for cell in result.cells:
        cells_json.append(
            {
                "fold": cell.fold,
                "fraction": cell.fraction,
                "hidden_size": cell.hidden_size,
                "train_size": cell.train_size,
                "final_loss": cell.final_loss,
                "top_k": {str(k): cell.report.top_k_accuracy[k] for k in plan.k_values},
                "thresholds": [
                    {
                        "threshold": threshold_to_number(tr.threshold),
                        "precision": tr.precision,
                        "recall": tr.recall,
                        "f1": tr.f1,
                        "aligned_count": tr.aligned_count,
                    }
                    for tr in cell.report.threshold_rows
                ],
            }
        )

    aggregates = []
    for fraction in plan.fractions:
        for hidden in plan.hidden_sizes:
            group = [c for c in result.cells if c.fraction == fraction and c.hidden_size == hidden]
            for k in plan.k_values:
                entry = {
                    "fraction": fraction,
                    "hidden_size": hidden,
                    "measure": "top_k",
                    "parameter": k,
                }
                entry.update(_aggregate([c.report.top_k_accuracy[k] for c in group]))
                aggregates.append(entry)
            for ti, threshold in enumerate(plan.thresholds):
                for measure in ("precision", "recall", "f1"):
                    entry = {
                        "fraction": fraction,
                        "hidden_size": hidden,
                        "measure": measure,
                        "parameter": threshold_to_number(threshold),
                    }
                    entry.update(
                        _aggregate(
                            [getattr(c.report.threshold_rows[ti], measure) for c in group]
                        )
                    )
                    aggregates.append(entry)

    return {
        "plan": plan.to_dict(),
        "plan_hash": plan.plan_hash(),
        "cells": cells_json,
        "aggregates": aggregates,
    }


def write_sweep_summary(result: SweepResult, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(sweep_summary(result), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
