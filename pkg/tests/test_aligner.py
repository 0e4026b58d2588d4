import numpy as np
import pytest

from bitextmine import (
    FormatError,
    Metric,
    ValidationError,
    align,
    load_alignment_tsv,
    load_candidates_tsv,
    save_alignment_tsv,
    save_candidates_tsv,
    score_matrix,
    top_k,
)


def full_sort_oracle(queries, targets, metric: Metric, k: int):
    """Reference ranking: 64-bit scores, full python sort, ties by index."""
    scores = score_matrix(queries, targets, metric)
    out = []
    for qi in range(scores.shape[0]):
        if metric.higher_is_better:
            order = sorted(range(scores.shape[1]), key=lambda j: (-scores[qi, j], j))
        else:
            order = sorted(range(scores.shape[1]), key=lambda j: (scores[qi, j], j))
        out.append([(j, scores[qi, j]) for j in order[:k]])
    return out


class TestTopK:
    @pytest.mark.parametrize("metric", list(Metric))
    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_matches_full_sort_oracle(self, rng, metric, k):
        q = rng.normal(size=(40, 12)).astype(np.float32)
        t = rng.normal(size=(25, 12)).astype(np.float32)
        got = top_k(q, t, metric, k)
        oracle = full_sort_oracle(q, t, metric, k)
        for cl, expected in zip(got, oracle):
            assert cl.candidates == expected

    @pytest.mark.parametrize("metric", list(Metric))
    def test_exact_ties_break_to_lower_index(self, rng, metric):
        t = rng.normal(size=(6, 8)).astype(np.float32)
        t[4] = t[1]  # duplicate row: scores against any query tie bitwise
        q = rng.normal(size=(5, 8)).astype(np.float32)
        for cl in top_k(q, t, metric, k=6):
            ranks = {j: r for r, (j, _) in enumerate(cl.candidates)}
            assert ranks[1] + 1 == ranks[4]
            assert cl.candidates[ranks[1]][1] == cl.candidates[ranks[4]][1]

    def test_all_equal_scores_yield_index_order(self):
        q = np.ones((2, 4), dtype=np.float32)
        t = np.tile(np.ones(4, dtype=np.float32) * 2.0, (5, 1))
        for cl in top_k(q, t, Metric.COSINE, k=5):
            assert [j for j, _ in cl.candidates] == [0, 1, 2, 3, 4]

    def test_query_index_preserved(self, rng):
        q = rng.normal(size=(7, 4)).astype(np.float32)
        t = rng.normal(size=(9, 4)).astype(np.float32)
        lists = top_k(q, t, Metric.COSINE, 2)
        assert [cl.query_index for cl in lists] == list(range(7))

    def test_k_validation(self, rng):
        q = rng.normal(size=(2, 4))
        t = rng.normal(size=(3, 4))
        with pytest.raises(ValidationError):
            top_k(q, t, Metric.COSINE, 0)
        with pytest.raises(ValidationError):
            top_k(q, t, Metric.COSINE, 4)

    def test_blocking_does_not_change_results(self, rng):
        q = rng.normal(size=(30, 8)).astype(np.float32)
        t = rng.normal(size=(50, 8)).astype(np.float32)
        reference = top_k(q, t, Metric.COSINE, 5)
        for block in (1, 4, 13):
            assert top_k(q, t, Metric.COSINE, 5, block_rows=block) == reference


class TestAlign:
    def test_self_alignment_is_identity(self, rng):
        m = rng.normal(size=(20, 6)).astype(np.float32)
        result = align(m, m, Metric.COSINE)
        assert [(q, t) for q, t, _ in result.pairs] == [(i, i) for i in range(20)]
        assert all(s == 1.0 for _, _, s in result.pairs)

    def test_threshold_filters_pairs(self, rng):
        q = rng.normal(size=(30, 8)).astype(np.float32)
        t = rng.normal(size=(30, 8)).astype(np.float32)
        unfiltered = align(q, t, Metric.COSINE)
        cutoff = sorted(s for _, _, s in unfiltered.pairs)[10]
        filtered = align(q, t, Metric.COSINE, threshold=cutoff)
        assert len(filtered.pairs) < len(unfiltered.pairs)
        assert all(s >= cutoff for _, _, s in filtered.pairs)
        kept = {(q_, t_) for q_, t_, s in unfiltered.pairs if s >= cutoff}
        assert {(q_, t_) for q_, t_, _ in filtered.pairs} == kept

    def test_threshold_boundary_is_inclusive(self):
        q = np.array([[1.0, 0.0]], dtype=np.float32)
        t = np.array([[1.0, 0.0]], dtype=np.float32)
        assert len(align(q, t, Metric.COSINE, threshold=1.0).pairs) == 1

    def test_threshold_with_euclidean_rejected(self, rng):
        m = rng.normal(size=(3, 4))
        with pytest.raises(ValidationError):
            align(m, m, Metric.EUCLIDEAN, threshold=0.5)

    def test_euclidean_alignment(self, rng):
        m = rng.normal(size=(10, 5)).astype(np.float32)
        result = align(m, m, Metric.EUCLIDEAN)
        assert [(q, t) for q, t, _ in result.pairs] == [(i, i) for i in range(10)]
        assert all(s == 0.0 for _, _, s in result.pairs)

    def test_candidate_lists_retained(self, rng):
        q = rng.normal(size=(4, 6)).astype(np.float32)
        t = rng.normal(size=(8, 6)).astype(np.float32)
        result = align(q, t, Metric.COSINE, k=3)
        assert len(result.candidate_lists) == 4
        assert all(len(cl.candidates) == 3 for cl in result.candidate_lists)


class TestTsvRoundTrips:
    def test_alignment_round_trip(self, rng, tmp_path):
        q = rng.normal(size=(12, 5)).astype(np.float32)
        t = rng.normal(size=(15, 5)).astype(np.float32)
        result = align(q, t, Metric.COSINE)
        path = tmp_path / "a.tsv"
        save_alignment_tsv(result, path)
        back = load_alignment_tsv(path)
        assert [(q_, t_) for q_, t_, _ in back] == [(q_, t_) for q_, t_, _ in result.pairs]
        for (_, _, s_back), (_, _, s) in zip(back, result.pairs):
            assert s_back == pytest.approx(s, abs=1e-6)

    def test_candidates_round_trip(self, rng, tmp_path):
        q = rng.normal(size=(6, 5)).astype(np.float32)
        t = rng.normal(size=(9, 5)).astype(np.float32)
        lists = top_k(q, t, Metric.COSINE, 4)
        path = tmp_path / "c.tsv"
        save_candidates_tsv(lists, path)
        back = load_candidates_tsv(path)
        assert len(back) == len(lists)
        for cl_back, cl in zip(back, lists):
            assert cl_back.query_index == cl.query_index
            assert [j for j, _ in cl_back.candidates] == [j for j, _ in cl.candidates]

    def test_candidates_rank_gap_rejected(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("0\t0\t3\t0.5\n0\t2\t4\t0.4\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_candidates_tsv(path)

    def test_malformed_alignment_rejected(self, tmp_path):
        path = tmp_path / "a.tsv"
        path.write_text("0\tx\t0.5\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_alignment_tsv(path)
