import math
from collections import defaultdict

import pytest

from ctxsplit.aligner import (
    NULL,
    AlignerConfig,
    TranslationTable,
    align_corpus,
    train,
    viterbi_align,
)
from ctxsplit.corpus import Corpus
from ctxsplit.errors import DataError

from conftest import make_corpus, make_pair


def reference_em(pairs, iterations, include_null=True):
    """Straightforward nested-loop Model 1 EM, kept independent of the library."""
    cooccur = defaultdict(set)
    for source, target in pairs:
        for s in list(source) + ([NULL] if include_null else []):
            cooccur[s].update(target)
    table = {(s, t): 1.0 / len(ts) for s, ts in cooccur.items() for t in ts}
    logliks = []
    for _ in range(iterations):
        counts = defaultdict(float)
        loglik = 0.0
        for source, target in pairs:
            candidates = ([NULL] if include_null else []) + list(source)
            for t in target:
                denominator = sum(table[(s, t)] for s in candidates)
                loglik += math.log(denominator) - math.log(len(candidates))
                for s in candidates:
                    counts[(s, t)] += table[(s, t)] / denominator
        logliks.append(loglik)
        totals = defaultdict(float)
        for (s, _), value in counts.items():
            totals[s] += value
        table = {key: value / totals[key[0]] for key, value in counts.items()}
    return table, logliks


# corpus from the module examples: two ambiguous pairs plus three copies of
# each disambiguating singleton; reference-EM values after 5 iterations
ORACLE_PAIRS = [("a b", "x y")] * 2 + [("a", "x")] * 3 + [("b", "y")] * 3
ORACLE_T_AX = 0.993404204952053
ORACLE_LOGLIKS = [
    -6.931471805599454,
    -5.522434259135046,
    -4.911272477692558,
    -4.663905645513996,
    -4.564782690350688,
]


def oracle_corpus():
    return make_corpus(("doc0", ORACLE_PAIRS))


class TestTrain:
    def test_matches_reference_em(self):
        table = train(oracle_corpus(), AlignerConfig(iterations=5))
        reference, logliks = reference_em(
            [(s.split(), t.split()) for s, t in ORACLE_PAIRS], 5
        )
        assert set(table.probabilities) == set(reference)
        for key, value in reference.items():
            assert table.prob(*key) == pytest.approx(value, abs=1e-12)
        assert table.log_likelihoods == pytest.approx(logliks, abs=1e-12)

    def test_frozen_oracle_values(self):
        table = train(oracle_corpus(), AlignerConfig(iterations=5))
        assert table.prob("a", "x") == pytest.approx(ORACLE_T_AX, abs=1e-12)
        assert table.prob("b", "y") == pytest.approx(ORACLE_T_AX, abs=1e-12)
        assert table.prob("a", "x") > 0.99
        assert table.prob("b", "y") > 0.99
        assert table.log_likelihoods == pytest.approx(ORACLE_LOGLIKS, abs=1e-12)

    def test_single_pair_without_null_is_exact(self):
        corpus = make_corpus(("doc0", [("a", "x")]))
        table = train(corpus, AlignerConfig(iterations=5, include_null=False))
        assert table.prob("a", "x") == 1.0

    def test_iteration_validation(self):
        with pytest.raises(DataError):
            AlignerConfig(iterations=0)

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError, match="empty corpus"):
            train(Corpus(()), AlignerConfig())

    def test_loglik_non_decreasing_and_rows_normalized(self, rng):
        pairs = []
        for _ in range(60):
            length = rng.randint(1, 6)
            src = " ".join(f"s{rng.randrange(12)}" for _ in range(length))
            tgt = " ".join(f"t{rng.randrange(12)}" for _ in range(length))
            pairs.append((src, tgt))
        corpus = make_corpus(("doc0", pairs))
        for config in (
            AlignerConfig(iterations=6),
            AlignerConfig(iterations=6, use_diagonal_prior=True),
            AlignerConfig(iterations=6, include_null=False),
        ):
            table = train(corpus, config)
            lls = table.log_likelihoods
            assert all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))
            row_sums = defaultdict(float)
            for (s, _), p in table.probabilities.items():
                assert p >= 0.0
                row_sums[s] += p
            for total in row_sums.values():
                assert total == pytest.approx(1.0, abs=1e-6)

    def test_normalized_after_every_iteration(self):
        corpus = oracle_corpus()
        for iterations in range(1, 6):
            table = train(corpus, AlignerConfig(iterations=iterations))
            row_sums = defaultdict(float)
            for (s, _), p in table.probabilities.items():
                row_sums[s] += p
            for total in row_sums.values():
                assert total == pytest.approx(1.0, abs=1e-6)

    def test_thread_count_does_not_change_bits(self, rng):
        pairs = []
        for _ in range(1500):  # spans several reduction chunks
            length = rng.randint(1, 5)
            src = " ".join(f"s{rng.randrange(30)}" for _ in range(length))
            tgt = " ".join(f"t{rng.randrange(30)}" for _ in range(length))
            pairs.append((src, tgt))
        corpus = make_corpus(("doc0", pairs))
        config = AlignerConfig(iterations=3)
        serial = train(corpus, config, threads=1)
        threaded = train(corpus, config, threads=8)
        assert serial.probabilities == threaded.probabilities
        assert serial.log_likelihoods == threaded.log_likelihoods


class TestViterbi:
    def test_oracle_corpus_alignment(self):
        table = train(oracle_corpus(), AlignerConfig())
        pair = make_pair("a b", "x y")
        assert viterbi_align(pair, table, AlignerConfig()) == frozenset({(1, 1), (2, 2)})

    def test_single_token_pair(self):
        table = TranslationTable({("a", "x"): 1.0})
        pair = make_pair("a", "x")
        config = AlignerConfig(include_null=False)
        assert viterbi_align(pair, table, config) == frozenset({(1, 1)})

    def test_unseen_target_goes_unaligned_with_null(self):
        table = train(oracle_corpus(), AlignerConfig())
        pair = make_pair("a", "unseen")
        assert viterbi_align(pair, table, AlignerConfig()) == frozenset()

    def test_ties_break_toward_smallest_source(self):
        table = TranslationTable({("a", "x"): 0.5, ("b", "x"): 0.5})
        pair = make_pair("a b", "x")
        config = AlignerConfig(include_null=False)
        assert viterbi_align(pair, table, config) == frozenset({(1, 1)})

    def test_diagonal_prior_prefers_diagonal(self):
        # equal lexical probabilities: only the positional prior can decide
        table = TranslationTable({("a", "x"): 0.5, ("b", "x"): 0.5})
        pair = make_pair("a b", "y x")
        flat = AlignerConfig(include_null=False)
        diagonal = AlignerConfig(include_null=False, use_diagonal_prior=True, diagonal_tension=4.0)
        assert (2, 2) not in viterbi_align(pair, table, flat)  # tie falls to j=1
        assert (2, 2) in viterbi_align(pair, table, diagonal)


class TestAlignCorpus:
    def test_bijective_corpus_recovered_exactly(self, rng):
        # each source type always co-occurs with exactly one target type
        types = [(f"s{i}", f"t{i}") for i in range(20)]
        pairs = []
        gold = []
        for _ in range(300):
            chosen = rng.sample(types, rng.randint(1, 6))
            pairs.append((" ".join(s for s, _ in chosen), " ".join(t for _, t in chosen)))
            gold.append(frozenset((i + 1, i + 1) for i in range(len(chosen))))
        corpus = make_corpus(("doc0", pairs))
        aligned = align_corpus(corpus, AlignerConfig(iterations=5))
        for pair, expected in zip(aligned.pairs(), gold):
            assert pair.alignment == expected

    def test_deterministic_across_runs(self, rng):
        pairs = [
            (" ".join(f"s{rng.randrange(9)}" for _ in range(3)),
             " ".join(f"t{rng.randrange(9)}" for _ in range(3)))
            for _ in range(40)
        ]
        corpus = make_corpus(("doc0", pairs))
        first = align_corpus(corpus, AlignerConfig(), threads=1)
        second = align_corpus(corpus, AlignerConfig(), threads=4)
        assert [p.alignment for p in first.pairs()] == [p.alignment for p in second.pairs()]

    def test_propagates_empty_corpus_error(self):
        with pytest.raises(DataError):
            align_corpus(Corpus(()), AlignerConfig())
