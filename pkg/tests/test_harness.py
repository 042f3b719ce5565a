import json
import math
from fractions import Fraction

import pytest
import scipy.stats

from ctxsplit.errors import DataError
from ctxsplit.harness import (
    ContrastiveExample,
    ScoreRecord,
    contrastive_accuracy,
    corpus_bleu,
    derangement,
    format_report_table,
    mcnemar_test,
    read_examples_jsonl,
    read_outcomes,
    read_scores,
    report_to_dict,
    shuffle_context,
    write_outcomes,
)


def example(ex_id="e", distance=0, pronoun="es", n_candidates=2, context=("c",)):
    return ContrastiveExample(
        id=ex_id,
        src_sentence="But I saw it .",
        src_context=tuple(context),
        tgt_context=tuple(f"t-{c}" for c in context),
        candidates=tuple(f"cand{i}" for i in range(n_candidates)),
        ante_distance=distance,
        pronoun_class=pronoun,
    )


def exact_binomial_oracle(b, c):
    """Two-sided exact binomial at rate 1/2: sum the point probabilities that
    do not exceed the observed one, in exact rational arithmetic."""
    n = b + c
    if n == 0:
        return 1.0
    observed = Fraction(math.comb(n, b), 2**n)
    total = sum(
        (Fraction(math.comb(n, i), 2**n) for i in range(n + 1)
         if Fraction(math.comb(n, i), 2**n) <= observed),
        Fraction(0),
    )
    return float(min(total, Fraction(1)))


class TestContrastiveAccuracy:
    def test_counting(self):
        examples = [example(f"e{i}") for i in range(4)]
        scores = [
            ScoreRecord("e0", (2.0, 1.0)),
            ScoreRecord("e1", (0.5, 0.1)),
            ScoreRecord("e2", (-1.0, -2.0)),
            ScoreRecord("e3", (0.0, 3.0)),
        ]
        report = contrastive_accuracy(examples, scores)
        assert report.overall_accuracy == pytest.approx(0.75)
        assert report.n_total == 4

    def test_tie_counts_as_incorrect(self):
        report = contrastive_accuracy([example()], [ScoreRecord("e", (1.0, 1.0))])
        assert report.overall_accuracy == 0.0

    def test_distance_buckets_and_weighted_identity(self):
        examples = [example("a", 0), example("b", 1), example("c", 1), example("d", 4)]
        scores = [
            ScoreRecord("a", (1.0, 0.0)),
            ScoreRecord("b", (0.0, 1.0)),
            ScoreRecord("c", (1.0, 0.0)),
            ScoreRecord("d", (1.0, 0.0)),
        ]
        report = contrastive_accuracy(examples, scores)
        assert {bucket: stat.n for bucket, stat in report.per_distance.items()} == {
            "0": 1, "1": 2, ">3": 1}
        weighted = sum(s.accuracy * s.n for s in report.per_distance.values())
        assert weighted / report.n_total == pytest.approx(report.overall_accuracy, abs=1e-9)

    def test_per_class_accuracy(self):
        examples = [example("a", pronoun="er"), example("b", pronoun="sie"),
                    example("c", pronoun="er")]
        scores = [ScoreRecord("a", (1.0, 0.0)), ScoreRecord("b", (0.0, 1.0)),
                  ScoreRecord("c", (0.0, 1.0))]
        report = contrastive_accuracy(examples, scores)
        assert report.per_class["er"].accuracy == pytest.approx(0.5)
        assert report.per_class["sie"].accuracy == 0.0

    def test_missing_and_duplicate_and_stray_records(self):
        examples = [example("a"), example("b")]
        with pytest.raises(DataError, match="missing score"):
            contrastive_accuracy(examples, [ScoreRecord("a", (1.0, 0.0))])
        with pytest.raises(DataError, match="duplicate"):
            contrastive_accuracy(
                examples,
                [ScoreRecord("a", (1.0, 0.0))] * 2 + [ScoreRecord("b", (1.0, 0.0))],
            )
        with pytest.raises(DataError, match="unknown example"):
            contrastive_accuracy(
                examples,
                [ScoreRecord("a", (1.0, 0.0)), ScoreRecord("b", (1.0, 0.0)),
                 ScoreRecord("z", (1.0, 0.0))],
            )

    def test_score_count_mismatch(self):
        with pytest.raises(DataError, match="2 candidates but 3 scores"):
            contrastive_accuracy([example()], [ScoreRecord("e", (1.0, 0.0, 2.0))])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(DataError, match="non-finite"):
            ScoreRecord("e", (1.0, float("nan")))

    def test_invariant_under_monotone_transforms(self, rng):
        examples = [example(f"e{i}", rng.randint(0, 6), n_candidates=3) for i in range(30)]
        scores = [
            ScoreRecord(f"e{i}", tuple(rng.uniform(-5, 5) for _ in range(3)))
            for i in range(30)
        ]
        baseline = contrastive_accuracy(examples, scores)
        for transform in (lambda s: 2.0 * s + 3.0, math.exp, lambda s: 1.0 / (1.0 + math.exp(-s))):
            transformed = [
                ScoreRecord(r.example_id, tuple(transform(s) for s in r.candidate_scores))
                for r in scores
            ]
            assert contrastive_accuracy(examples, transformed) == baseline


class TestMcNemar:
    def vectors(self, b, c, both=5):
        a_side = [True] * b + [False] * c + [True] * both
        b_side = [False] * b + [True] * c + [True] * both
        return a_side, b_side

    def test_no_discordance(self):
        outcomes = [True, False, True]
        assert mcnemar_test(outcomes, outcomes) == (0, 0, 1.0)

    def test_exact_branch_matches_rational_oracle(self):
        b, c, p = mcnemar_test(*self.vectors(10, 2))
        assert (b, c) == (10, 2)
        assert p == pytest.approx(exact_binomial_oracle(10, 2), abs=1e-12)
        assert p == pytest.approx(158 / 4096, abs=1e-15)

    def test_exact_branch_all_small_tables(self):
        for n in range(0, 21):
            for b in range(n + 1):
                c = n - b
                _, _, p = mcnemar_test(*self.vectors(b, c))
                assert p == pytest.approx(exact_binomial_oracle(b, c), abs=1e-12)
                # scipy computes the same two-sided exact test
                if n > 0:
                    reference = scipy.stats.binomtest(b, n, 0.5).pvalue
                    assert p == pytest.approx(reference, rel=1e-9)

    def test_highly_significant_case(self):
        _, _, p = mcnemar_test(*self.vectors(0, 60))
        assert p < 0.01
        statistic = (abs(0 - 60) - 1) ** 2 / 60
        assert abs(p - scipy.stats.chi2.sf(statistic, 1)) < 1e-6

    def test_chi_squared_branch_matches_scipy(self):
        for b, c in ((30, 90), (80, 45), (200, 150), (51, 50)):
            _, _, p = mcnemar_test(*self.vectors(b, c))
            statistic = (abs(b - c) - 1) ** 2 / (b + c)
            assert p == pytest.approx(scipy.stats.chi2.sf(statistic, 1), abs=1e-12)

    def test_symmetry(self, rng):
        for _ in range(20):
            b, c = rng.randint(0, 40), rng.randint(0, 40)
            left = mcnemar_test(*self.vectors(b, c))
            right = mcnemar_test(*reversed(self.vectors(b, c)))
            assert left[0] == right[1] and left[1] == right[0]
            assert left[2] == right[2]

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="mismatch"):
            mcnemar_test([True], [True, False])


class TestShuffleContext:
    def test_two_examples_swap(self):
        examples = [example("a", context=("ca",)), example("b", context=("cb",))]
        shuffled = shuffle_context(examples, 7)
        assert shuffled[0].src_context == examples[1].src_context
        assert shuffled[1].src_context == examples[0].src_context

    def test_derangement_for_various_sizes(self):
        for n in (2, 3, 10, 1000):
            order = derangement(n, 13)
            assert sorted(order) == list(range(n))
            assert all(order[i] != i for i in range(n))

    def test_deterministic_per_seed(self):
        examples = [example(f"e{i}", context=(f"c{i}",)) for i in range(20)]
        assert shuffle_context(examples, 3) == shuffle_context(examples, 3)
        assert shuffle_context(examples, 3) != shuffle_context(examples, 4)

    def test_preserves_context_multiset_and_rest(self):
        examples = [example(f"e{i}", distance=i, context=(f"c{i}", f"d{i}")) for i in range(9)]
        shuffled = shuffle_context(examples, 99)
        assert sorted(e.src_context for e in shuffled) == sorted(e.src_context for e in examples)
        assert sorted(e.tgt_context for e in shuffled) == sorted(e.tgt_context for e in examples)
        for before, after in zip(examples, shuffled):
            assert before.candidates == after.candidates
            assert before.ante_distance == after.ante_distance
            assert (after.src_context, after.tgt_context) != (
                before.src_context, before.tgt_context)

    def test_too_few_examples(self):
        with pytest.raises(DataError):
            shuffle_context([example()], 1)


class TestCorpusBleu:
    def test_identical_corpora_score_100(self):
        sentences = ["the cat sat on the mat", "a b c d"]
        assert corpus_bleu(sentences, sentences) == pytest.approx(100.0)

    def test_hand_computed_fixture(self):
        # order 1: 6/6 + clipped 2/4; order 2: 5/5 + 1/3; order 3: 4/4 + 0/2
        # -> order-3 match 4/6; order 4: 3/3 + 0/1; BP = 1 (10 hyp vs 9 ref)
        hyps = ["the cat sat on the mat", "the the the dog"]
        refs = ["the cat sat on the mat", "the dog barks"]
        expected = 100.0 * (
            (8 / 10) * (6 / 8) * (4 / 6) * (3 / 4)
        ) ** 0.25
        assert corpus_bleu(hyps, refs) == pytest.approx(expected, abs=1e-4)
        assert corpus_bleu(hyps, refs) == pytest.approx(74.00828, abs=1e-4)

    def test_brevity_penalty_only(self):
        score = corpus_bleu(["the cat sat on"], ["the cat sat on the mat"])
        assert score == pytest.approx(100.0 * math.exp(1.0 - 6.0 / 4.0), abs=1e-4)

    def test_zero_match_at_any_order_scores_zero(self):
        assert corpus_bleu(["a b c d"], ["e f g h"]) == 0.0
        # all hypotheses shorter than 4 tokens: no 4-gram can match
        assert corpus_bleu(["a b c"], ["a b c"]) == 0.0

    def test_case_sensitive(self):
        assert corpus_bleu(["The cat"], ["the cat"]) != pytest.approx(100.0)

    def test_permutation_invariance(self, rng):
        hyps = [f"h{i} x y z w" for i in range(6)]
        refs = [f"h{i} x y q w" for i in range(6)]
        baseline = corpus_bleu(hyps, refs)
        order = list(range(6))
        rng.shuffle(order)
        assert corpus_bleu([hyps[i] for i in order], [refs[i] for i in order]) == (
            pytest.approx(baseline))

    def test_errors(self):
        with pytest.raises(DataError, match="mismatch"):
            corpus_bleu(["a"], ["a", "b"])
        with pytest.raises(DataError, match="empty"):
            corpus_bleu([], [])


class TestIO:
    def test_examples_jsonl_round_trip(self, tmp_path):
        payload = {
            "id": "ex1", "src_sentence": "I saw it .",
            "src_context": ["The boat sank ."], "tgt_context": ["Das Boot sank ."],
            "candidates": ["Ich sah es .", "Ich sah ihn ."],
            "ante_distance": 1, "pronoun_class": "es",
        }
        path = tmp_path / "t.jsonl"
        path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
        (loaded,) = read_examples_jsonl(str(path))
        assert loaded.id == "ex1"
        assert loaded.candidates == ("Ich sah es .", "Ich sah ihn .")

    def test_examples_jsonl_reports_line(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text('{"id": "x"}\n', encoding="utf-8")
        with pytest.raises(DataError, match="line 1"):
            read_examples_jsonl(str(path))

    def test_scores_jsonl_and_tsv(self, tmp_path):
        jsonl = tmp_path / "s.jsonl"
        jsonl.write_text('{"id": "a", "scores": [0.5, -1.0]}\n', encoding="utf-8")
        tsv = tmp_path / "s.tsv"
        tsv.write_text("a\t0.5 -1.0\n", encoding="utf-8")
        assert read_scores(str(jsonl)) == read_scores(str(tsv)) == [
            ScoreRecord("a", (0.5, -1.0))]

    def test_outcomes_round_trip(self, tmp_path):
        path = tmp_path / "o.tsv"
        write_outcomes([("a", True), ("b", False)], str(path))
        assert read_outcomes(str(path)) == [("a", True), ("b", False)]

    def test_report_dict_and_table(self):
        examples = [example("a", 0), example("b", 1)]
        scores = [ScoreRecord("a", (1.0, 0.0)), ScoreRecord("b", (0.0, 1.0))]
        report = contrastive_accuracy(examples, scores)
        payload = report_to_dict(report)
        assert payload["per_distance"]["0"] == {"accuracy": 1.0, "n": 1}
        table = format_report_table(report)
        assert "Total" in table and "d=0" in table and "es" in table
