"""Bitext mining over sentence embeddings.

Aligns sentences across two corpora by exhaustive nearest-neighbor search in
embedding space, evaluates alignments against gold pairs, and fine-tunes the
source side with a small bottleneck adapter trained under a 1 - cosine loss.
"""

from .adapter import (
    AdapterModel,
    TrainConfig,
    TrainHistory,
    apply,
    forward,
    gradient,
    init_adapter,
    load_adapter,
    pair_loss,
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
    top_k,
)
from .corpus_io import (
    GoldAlignment,
    SentenceCorpus,
    check_parallel_counts,
    load_embeddings,
    load_sentences,
    save_embeddings,
)
from .errors import (
    DivergenceError,
    FormatError,
    SweepCellError,
    ValidationError,
    ZeroNormError,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    ThresholdRow,
    default_threshold_grid,
    evaluate,
    make_folds,
    number_to_threshold,
    precision_recall_f1,
    threshold_curve,
    threshold_to_number,
    top_k_accuracy,
    training_prefix,
)
from .experiments import (
    CSV_COLUMNS,
    CellResult,
    ExperimentPlan,
    SweepResult,
    load_plan,
    run_sweep,
    save_plan,
    sweep_rows,
    sweep_summary,
    write_sweep_csv,
    write_sweep_summary,
)
from .similarity import (
    Metric,
    cosine_similarity,
    euclidean_distance,
    normalize_rows,
    score_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_COLUMNS",
    "AdapterModel",
    "AlignmentResult",
    "CandidateList",
    "CellResult",
    "DivergenceError",
    "EvalReport",
    "ExperimentPlan",
    "FoldPlan",
    "FormatError",
    "GoldAlignment",
    "Metric",
    "SentenceCorpus",
    "SweepCellError",
    "SweepResult",
    "ThresholdRow",
    "TrainConfig",
    "TrainHistory",
    "ValidationError",
    "ZeroNormError",
    "align",
    "apply",
    "check_parallel_counts",
    "cosine_similarity",
    "default_threshold_grid",
    "euclidean_distance",
    "evaluate",
    "forward",
    "gradient",
    "init_adapter",
    "load_adapter",
    "load_alignment_tsv",
    "load_candidates_tsv",
    "load_embeddings",
    "load_plan",
    "load_sentences",
    "make_folds",
    "normalize_rows",
    "number_to_threshold",
    "pair_loss",
    "precision_recall_f1",
    "run_sweep",
    "sweep_rows",
    "save_adapter",
    "save_alignment_tsv",
    "save_candidates_tsv",
    "save_embeddings",
    "save_plan",
    "score_matrix",
    "sweep_summary",
    "threshold_curve",
    "threshold_to_number",
    "top_k",
    "top_k_accuracy",
    "train",
    "training_prefix",
    "write_sweep_csv",
    "write_sweep_summary",
]
