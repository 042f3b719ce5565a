"""Unsupervised word alignment: IBM Model 1 EM with an optional diagonal prior.

The translation table stores p(target type | source type); the source side
includes a distinguished empty word (NULL, represented as None) that absorbs
target tokens with no source counterpart. The optional positional prior
weights a candidate source position j for target position k by
exp(-tension * |j/|S| - k/|T||), fast_align style, with a fixed tension
(never re-estimated); the empty word gets a neutral weight of 1.

Expected counts are accumulated in fixed-size chunks that are merged in
chunk order, so results are bit-identical for any number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .corpus import Corpus, Document, Link, SentencePair
from .errors import DataError

log = logging.getLogger(__name__)

NULL = None  # distinguished empty source word
FLOOR_PROB = 1e-12  # score for (source, target) type pairs never seen in training
_CHUNK_SIZE = 512  # E-step reduction granularity; independent of thread count

SourceType = str | None
TokenPair = tuple[tuple[str, ...], tuple[str, ...]]


@dataclass(frozen=True)
class AlignerConfig:
    iterations: int = 5
    use_diagonal_prior: bool = False
    diagonal_tension: float = 4.0
    include_null: bool = True
    seed: int = 0  # reserved for stochastic variants; Model 1 EM is deterministic

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise DataError(f"iterations must be >= 1, got {self.iterations}")
        if self.diagonal_tension < 0:
            raise DataError(f"diagonal_tension must be >= 0, got {self.diagonal_tension}")


class TranslationTable:
    """Lexical translation probabilities keyed by (source type, target type)."""

    def __init__(
        self,
        probabilities: Mapping[tuple[SourceType, str], float],
        log_likelihoods: Sequence[float] = (),
    ) -> None:
        self.probabilities = dict(probabilities)
        self.log_likelihoods = list(log_likelihoods)

    def prob(self, source_type: SourceType, target_type: str) -> float:
        return self.probabilities.get((source_type, target_type), FLOOR_PROB)


def _token_pairs(corpus: Corpus) -> list[TokenPair]:
    return [(pair.source.tokens, pair.target.tokens) for pair in corpus.pairs()]


def _uniform_init(pairs: Sequence[TokenPair], include_null: bool) -> dict:
    cooccurring: dict[SourceType, set[str]] = {}
    for source, target in pairs:
        source_types: tuple[SourceType, ...] = source + ((NULL,) if include_null else ())
        for s in source_types:
            bucket = cooccurring.setdefault(s, set())
            bucket.update(target)
    probs = {}
    for s, targets in cooccurring.items():
        p = 1.0 / len(targets)
        for t in sorted(targets):
            probs[(s, t)] = p
    return probs


def _position_weight(j: int, k: int, m: int, n: int, tension: float | None) -> float:
    # j == 0 is the empty word; it carries no positional preference
    if tension is None or j == 0:
        return 1.0
    return math.exp(-tension * abs(j / m - k / n))


def _candidates(source: tuple[str, ...], include_null: bool) -> list[tuple[int, SourceType]]:
    positions: list[tuple[int, SourceType]] = [(0, NULL)] if include_null else []
    positions.extend(enumerate(source, start=1))
    return positions


def _estep_chunk(
    chunk: Sequence[TokenPair], probs: dict, config: AlignerConfig
) -> tuple[dict, float]:
    tension = config.diagonal_tension if config.use_diagonal_prior else None
    counts: dict[tuple[SourceType, str], float] = {}
    loglik = 0.0
    for source, target in chunk:
        m, n = len(source), len(target)
        positions = _candidates(source, config.include_null)
        for k, t in enumerate(target, start=1):
            scores = []
            weight_norm = 0.0
            total = 0.0
            for j, s in positions:
                w = _position_weight(j, k, m, n, tension)
                score = w * probs.get((s, t), FLOOR_PROB)
                weight_norm += w
                total += score
                scores.append((s, score))
            loglik += math.log(total) - math.log(weight_norm)
            for s, score in scores:
                key = (s, t)
                counts[key] = counts.get(key, 0.0) + score / total
    return counts, loglik


def _maximize(counts: Mapping[tuple[SourceType, str], float]) -> dict:
    totals: dict[SourceType, float] = {}
    for (s, _), c in counts.items():
        totals[s] = totals.get(s, 0.0) + c
    return {(s, t): c / totals[s] for (s, t), c in counts.items()}


def train(corpus: Corpus, config: AlignerConfig, threads: int = 1) -> TranslationTable:
    """EM-train a translation table; per-iteration log-likelihood is recorded.

    The log-likelihood of the table entering each iteration is appended to
    TranslationTable.log_likelihoods; the sequence is non-decreasing.
    """
    pairs = _token_pairs(corpus)
    if not pairs:
        raise DataError("cannot train on an empty corpus")
    probs = _uniform_init(pairs, config.include_null)
    chunks = [pairs[i : i + _CHUNK_SIZE] for i in range(0, len(pairs), _CHUNK_SIZE)]
    log_likelihoods = []
    for iteration in range(config.iterations):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partials = list(pool.map(lambda c: _estep_chunk(c, probs, config), chunks))
        else:
            partials = [_estep_chunk(chunk, probs, config) for chunk in chunks]
        counts: dict[tuple[SourceType, str], float] = {}
        for chunk_counts, _ in partials:  # merged in chunk order: deterministic
            for key, value in chunk_counts.items():
                counts[key] = counts.get(key, 0.0) + value
        loglik = math.fsum(ll for _, ll in partials)
        log_likelihoods.append(loglik)
        log.info("EM iteration %d: log-likelihood %.6f", iteration + 1, loglik)
        probs = _maximize(counts)
    return TranslationTable(probs, log_likelihoods)


def viterbi_align(
    pair: SentencePair, table: TranslationTable, config: AlignerConfig
) -> frozenset[Link]:
    """Best-scoring source position for each target position; NULL yields no link.

    Ties break toward the empty word and then the smallest source position.
    """
    tension = config.diagonal_tension if config.use_diagonal_prior else None
    m, n = len(pair.source), len(pair.target)
    links = set()
    for k, t in enumerate(pair.target.tokens, start=1):
        best_j = 0 if config.include_null else None
        best_score = -math.inf
        for j, s in _candidates(pair.source.tokens, config.include_null):
            score = _position_weight(j, k, m, n, tension) * table.prob(s, t)
            if score > best_score:
                best_score = score
                best_j = j
        if best_j:  # 0 is the empty word
            links.add((best_j, k))
    return frozenset(links)


def align_corpus(corpus: Corpus, config: AlignerConfig, threads: int = 1) -> Corpus:
    """Train on the corpus and populate every pair's alignment via Viterbi."""
    table = train(corpus, config, threads=threads)
    documents = tuple(
        Document(doc.id, tuple(replace(p, alignment=viterbi_align(p, table, config)) for p in doc.pairs))
        for doc in corpus.documents
    )
    return Corpus(documents)
