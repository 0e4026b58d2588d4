"""End-to-end acceptance checks for the bitext-mining engine.

Each test verifies one shipped guarantee at its stated tolerance and prints a
single PASS/FAIL line (visible with ``pytest -s``). Tolerances and runtime
budgets are part of the contract: a slower or less accurate implementation
fails here even if the unit tests stay green.
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import pytest

from bitextmine import (
    AdapterModel,
    ExperimentPlan,
    GoldAlignment,
    Metric,
    TrainConfig,
    align,
    apply,
    forward,
    gradient,
    init_adapter,
    load_adapter,
    load_embeddings,
    make_folds,
    normalize_rows,
    pair_loss,
    run_sweep,
    save_adapter,
    save_embeddings,
    score_matrix,
    threshold_curve,
    top_k,
    top_k_accuracy,
    train,
    write_sweep_csv,
    write_sweep_summary,
)

from synth import heldout_accuracy, make_recovery_task, make_small_parallel


@contextmanager
def criterion(name: str, info: dict | None = None):
    """Print exactly one PASS/FAIL line for an acceptance criterion."""
    info = info if info is not None else {}
    t0 = time.perf_counter()
    try:
        yield info
    except BaseException:
        print(f"FAIL {name} ({time.perf_counter() - t0:.2f}s)")
        raise
    detail = f" -- {info['detail']}" if "detail" in info else ""
    print(f"PASS {name} ({time.perf_counter() - t0:.2f}s){detail}")


@dataclass(frozen=True)
class RecoveryRun:
    seed: int
    raw_top_1: float
    tuned_top_1: float
    tuned_top_3: float
    tuned_queries: np.ndarray
    target: np.ndarray
    train_count: int


@pytest.fixture(scope="module")
def recovery():
    """Five seeded runs of the synthetic distortion-recovery task, shared by
    the recovery, threshold-law, and monotonicity criteria."""
    t0 = time.perf_counter()
    runs = []
    for seed in range(5):
        task = make_recovery_task(seed)
        n_train = task.train_count
        model = init_adapter(task.source.shape[1], 32, seed=seed)
        trained, _ = train(
            model, task.source[:n_train], task.target[:n_train], TrainConfig(seed=seed)
        )
        tuned = apply(trained, task.heldout_queries)
        runs.append(
            RecoveryRun(
                seed=seed,
                raw_top_1=task.raw_top_1,
                tuned_top_1=heldout_accuracy(tuned, task.target, n_train, k=1),
                tuned_top_3=heldout_accuracy(tuned, task.target, n_train, k=3),
                tuned_queries=tuned,
                target=task.target,
                train_count=n_train,
            )
        )
    return runs, time.perf_counter() - t0


def small_sweep_plan() -> ExperimentPlan:
    return ExperimentPlan(
        k_folds=2,
        seed=0,
        fractions=(0.5, 1.0),
        hidden_sizes=(8, 16),
        k_values=(1, 3),
        thresholds=(None,),
        epochs=40,
        batch_size=32,
        learning_rate=1e-3,
    )


@pytest.fixture(scope="module")
def small_sweep():
    source, target = make_small_parallel(seed=0)
    plan = small_sweep_plan()
    return source, target, plan, run_sweep(source, target, plan)


def finite_difference_gradients(model, x, y, step=1e-4):
    grads = []
    for p in model.params():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = p[idx]
            p[idx] = original + step
            up = pair_loss(model, x, y)
            p[idx] = original - step
            down = pair_loss(model, x, y)
            p[idx] = original
            g[idx] = (up - down) / (2.0 * step)
            it.iternext()
        grads.append(g)
    return grads


def test_gradient_correctness():
    """Analytic gradients match 64-bit central differences at d=16, h=8."""
    with criterion("gradient-correctness") as info:
        t0 = time.perf_counter()
        worst = 0.0
        for draw in range(100):
            activation = "relu" if draw % 2 == 0 else "identity"
            model = init_adapter(16, 8, activation=activation, seed=draw)
            data = np.random.default_rng(np.random.SeedSequence([draw, 77]))
            x = data.normal(size=16)
            while not np.linalg.norm(forward(model, x)):
                x = data.normal(size=16)  # skip rare all-dead ReLU draws
            y = data.normal(size=16)
            analytic = gradient(model, x, y).params()
            numeric = finite_difference_gradients(model, x, y)
            for ga, gn in zip(analytic, numeric):
                rel = np.abs(ga - gn) / np.maximum.reduce(
                    [np.abs(ga), np.abs(gn), np.full_like(ga, 1e-6)]
                )
                worst = max(worst, float(rel.max()))
        elapsed = time.perf_counter() - t0
        assert worst < 1e-4, f"max relative gradient error {worst:.3e}"
        assert elapsed < 5.0, f"gradient check took {elapsed:.2f}s"
        info["detail"] = f"max rel err {worst:.2e} over 100 draws"


def full_sort_oracle(scores: np.ndarray, metric: Metric, k: int):
    out = []
    for qi in range(scores.shape[0]):
        if metric.higher_is_better:
            order = sorted(range(scores.shape[1]), key=lambda j: (-scores[qi, j], j))
        else:
            order = sorted(range(scores.shape[1]), key=lambda j: (scores[qi, j], j))
        out.append([(j, float(scores[qi, j])) for j in order[:k]])
    return out


def test_oracle_equivalence():
    """top_k matches a naive full-sort oracle exactly, ties included."""
    with criterion("oracle-equivalence") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2025)
        queries = rng.normal(size=(500, 32)).astype(np.float32)
        targets = rng.normal(size=(800, 32)).astype(np.float32)
        targets[450] = targets[12]  # exact duplicates force tie-breaking
        targets[451] = targets[12]
        for metric in (Metric.COSINE, Metric.EUCLIDEAN):
            scores = score_matrix(queries, targets, metric)
            for k in (1, 3):
                got = top_k(queries, targets, metric, k)
                expected = full_sort_oracle(scores, metric, k)
                for cl, oracle_list in zip(got, expected):
                    assert cl.candidates == oracle_list
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0, f"oracle comparison took {elapsed:.2f}s"
        info["detail"] = "k in {1,3}, both metrics, 500x800 with planted ties"


def test_unit_sphere_metric_equivalence():
    """After row normalization, cosine and Euclidean rank identically."""
    with criterion("unit-sphere-equivalence") as info:
        rng = np.random.default_rng(99)
        queries = normalize_rows(rng.normal(size=(200, 24)))
        targets = normalize_rows(rng.normal(size=(300, 24)))
        targets[250] = targets[10]  # duplicate rows must tie-break identically
        cosine = top_k(queries, targets, Metric.COSINE, k=300)
        euclid = top_k(queries, targets, Metric.EUCLIDEAN, k=300)
        for cl_c, cl_e in zip(cosine, euclid):
            perm_c = [j for j, _ in cl_c.candidates]
            perm_e = [j for j, _ in cl_e.candidates]
            assert perm_c == perm_e
        info["detail"] = "200 queries, full 300-target permutations identical"


def test_synthetic_finetuning_recovery(recovery):
    """Training the bottleneck adapter at least doubles held-out Top-1."""
    runs, elapsed = recovery
    with criterion("synthetic-recovery") as info:
        passed = 0
        lines = []
        for run in runs:
            doubled = run.tuned_top_1 >= 2.0 * run.raw_top_1
            strict_gain = run.tuned_top_3 > run.tuned_top_1
            passed += doubled and strict_gain
            lines.append(
                f"seed {run.seed}: raw {run.raw_top_1:.3f} -> "
                f"top1 {run.tuned_top_1:.3f}, top3 {run.tuned_top_3:.3f}"
            )
        assert passed >= 4, "recovery criterion met in only " + f"{passed}/5 seeds: " + "; ".join(lines)
        assert elapsed < 60.0, f"recovery runs took {elapsed:.2f}s"
        info["detail"] = f"{passed}/5 seeds, {elapsed:.1f}s training total"


def test_threshold_laws(recovery):
    """Monotone threshold filtering and the unfiltered-equality law."""
    runs, _ = recovery
    run = runs[0]
    with criterion("threshold-laws") as info:
        result = align(run.tuned_queries, run.target, Metric.COSINE)
        gold = GoldAlignment(
            {i: run.train_count + i for i in range(run.tuned_queries.shape[0])}
        )
        grid = [None] + [round(0.05 * i, 2) for i in range(20)]
        rows = threshold_curve(result, gold, grid)

        counts = [row.aligned_count for row in rows]
        recalls = [row.recall for row in rows]
        assert counts == sorted(counts, reverse=True), "aligned_count not nonincreasing"
        assert recalls == sorted(recalls, reverse=True), "recall not nonincreasing"

        unfiltered = rows[0]
        top_1 = top_k_accuracy(result.candidate_lists, gold, k=1)
        assert unfiltered.precision == unfiltered.recall == unfiltered.f1 == top_1
        info["detail"] = (
            f"21 thresholds; unfiltered p=r=f1=top1={top_1:.4f} bitwise"
        )


def test_fold_laws_and_sweep_determinism(small_sweep, tmp_path):
    """Documented fold sizes, exact partition, and byte-identical reruns."""
    source, target, plan, first = small_sweep
    with criterion("fold-laws-and-determinism") as info:
        for seed in (0, 1, 7):
            folds = make_folds(7952, 5, seed=seed)
            assert sorted(len(f) for f in folds.folds) == [1590, 1590, 1590, 1591, 1591]
            combined = np.sort(np.concatenate(folds.folds))
            assert np.array_equal(combined, np.arange(7952))

        second = run_sweep(source, target, plan)
        artifacts = []
        for tag, result in (("first", first), ("second", second)):
            csv_path = tmp_path / f"{tag}.csv"
            json_path = tmp_path / f"{tag}.json"
            write_sweep_csv(result, csv_path)
            write_sweep_summary(result, json_path)
            artifacts.append((csv_path.read_bytes(), json_path.read_bytes()))
        assert artifacts[0] == artifacts[1], "sweep rerun changed artifact bytes"
        info["detail"] = "fold sizes {1591x2,1590x3}; rerun CSV+JSON byte-identical"


def test_round_trip_formats(tmp_path):
    """EMB1 and ADP1 round trips are bit-identical over 50 random fixtures."""
    with criterion("round-trip-formats") as info:
        rng = np.random.default_rng(7)
        emb_count = adp_count = 0
        for i in range(50):
            if i % 2 == 0:
                n = 0 if i == 0 else int(rng.integers(1, 40))
                d = int(rng.integers(1, 96))
                matrix = rng.normal(size=(n, d)).astype(np.float32)
                path = tmp_path / f"m{i}.emb1"
                save_embeddings(matrix, path)
                back = load_embeddings(path)
                assert back.shape == matrix.shape
                assert back.tobytes() == matrix.tobytes()
                emb_count += 1
            else:
                d = int(rng.integers(1, 48))
                h = int(rng.integers(1, 16))
                activation = "relu" if i % 4 == 1 else "identity"
                raw = init_adapter(d, h, activation=activation, seed=i)
                model = AdapterModel(
                    w1=raw.w1.astype(np.float32).astype(np.float64),
                    b1=raw.b1.astype(np.float32).astype(np.float64),
                    w2=rng.normal(size=(d, h)).astype(np.float32).astype(np.float64),
                    b2=rng.normal(size=d).astype(np.float32).astype(np.float64),
                    activation=activation,
                )
                path = tmp_path / f"m{i}.adp1"
                save_adapter(model, path)
                loaded = load_adapter(path)
                assert loaded.activation == model.activation
                for p, q in zip(loaded.params(), model.params()):
                    assert np.array_equal(p, q)
                again = tmp_path / f"m{i}b.adp1"
                save_adapter(loaded, again)
                assert again.read_bytes() == path.read_bytes()
                adp_count += 1
        info["detail"] = f"{emb_count} EMB1 + {adp_count} ADP1 fixtures, all bit-exact"


def test_monotone_in_k(small_sweep):
    """Top-3 accuracy is at least Top-1 on every synthetic sweep cell."""
    _, _, _, result = small_sweep
    with criterion("monotone-in-k") as info:
        for cell in result.cells:
            top1 = cell.report.top_k_accuracy[1]
            top3 = cell.report.top_k_accuracy[3]
            assert top3 >= top1, (
                f"cell fold={cell.fold} fraction={cell.fraction} h={cell.hidden_size}: "
                f"top3 {top3} < top1 {top1}"
            )
        info["detail"] = f"{len(result.cells)} cells checked"
