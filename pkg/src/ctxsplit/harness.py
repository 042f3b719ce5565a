"""Contrastive pronoun evaluation, McNemar significance, context shuffling, BLEU.

The harness ranks externally produced model scores; it never computes model
probabilities itself. Scores are used exactly as supplied (higher is better)
and the convention is recorded in the report metadata.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import DataError

DISTANCE_BUCKETS = ("0", "1", "2", "3", ">3")
MCNEMAR_EXACT_LIMIT = 100  # discordant-pair count up to which the exact test is used
SCORE_CONVENTION = "scores used as supplied, higher is better; ties count as incorrect"


@dataclass(frozen=True)
class ContrastiveExample:
    """One test item: candidate 0 is the correct translation."""

    id: str
    src_sentence: str
    src_context: tuple[str, ...]
    tgt_context: tuple[str, ...]
    candidates: tuple[str, ...]
    ante_distance: int
    pronoun_class: str

    def __post_init__(self) -> None:
        if len(self.candidates) < 2:
            raise DataError(f"example {self.id!r} needs >= 2 candidates")
        if len(self.src_context) != len(self.tgt_context):
            raise DataError(f"example {self.id!r}: context lists differ in length")
        if self.ante_distance < 0:
            raise DataError(f"example {self.id!r}: negative antecedent distance")


@dataclass(frozen=True)
class ScoreRecord:
    example_id: str
    candidate_scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if not all(math.isfinite(s) for s in self.candidate_scores):
            raise DataError(f"non-finite score for example {self.example_id!r}")


@dataclass(frozen=True)
class BucketStat:
    accuracy: float
    n: int


@dataclass(frozen=True)
class EvalReport:
    overall_accuracy: float
    per_distance: Mapping[str, BucketStat]  # keys among DISTANCE_BUCKETS, empty buckets omitted
    per_class: Mapping[str, BucketStat]
    n_total: int
    score_convention: str = SCORE_CONVENTION


def distance_bucket(distance: int) -> str:
    return str(distance) if distance <= 3 else ">3"


def _is_correct(scores: Sequence[float]) -> bool:
    # the correct candidate must beat every contrastive one strictly
    return all(scores[0] > s for s in scores[1:])


def example_outcomes(
    examples: Sequence[ContrastiveExample], scores: Iterable[ScoreRecord]
) -> list[tuple[str, bool]]:
    """Per-example correctness, in example order; validates the score records."""
    by_id: dict[str, ScoreRecord] = {}
    for record in scores:
        if record.example_id in by_id:
            raise DataError(f"duplicate score record for example {record.example_id!r}")
        by_id[record.example_id] = record
    outcomes = []
    for example in examples:
        record = by_id.pop(example.id, None)
        if record is None:
            raise DataError(f"missing score record for example {example.id!r}")
        if len(record.candidate_scores) != len(example.candidates):
            raise DataError(
                f"example {example.id!r} has {len(example.candidates)} candidates "
                f"but {len(record.candidate_scores)} scores"
            )
        outcomes.append((example.id, _is_correct(record.candidate_scores)))
    if by_id:
        stray = next(iter(by_id))
        raise DataError(f"score record for unknown example {stray!r}")
    return outcomes


def contrastive_accuracy(
    examples: Sequence[ContrastiveExample], scores: Iterable[ScoreRecord]
) -> EvalReport:
    """Accuracy overall, per antecedent-distance bucket and per pronoun class."""
    outcomes = example_outcomes(examples, scores)
    if not examples:
        raise DataError("no examples to evaluate")
    by_distance: dict[str, list[bool]] = {}
    by_class: dict[str, list[bool]] = {}
    n_correct = 0
    for example, (_, correct) in zip(examples, outcomes):
        n_correct += correct
        by_distance.setdefault(distance_bucket(example.ante_distance), []).append(correct)
        by_class.setdefault(example.pronoun_class, []).append(correct)
    per_distance = {
        bucket: BucketStat(sum(flags) / len(flags), len(flags))
        for bucket, flags in ((b, by_distance[b]) for b in DISTANCE_BUCKETS if b in by_distance)
    }
    per_class = {
        label: BucketStat(sum(flags) / len(flags), len(flags))
        for label, flags in sorted(by_class.items())
    }
    return EvalReport(
        overall_accuracy=n_correct / len(examples),
        per_distance=per_distance,
        per_class=per_class,
        n_total=len(examples),
    )


def mcnemar_test(
    outcomes_a: Sequence[bool], outcomes_b: Sequence[bool]
) -> tuple[int, int, float]:
    """Paired McNemar test on matched correctness vectors.

    Returns (b, c, p): b = A correct and B wrong, c = the reverse. The
    p-value is the exact two-sided binomial at rate 1/2 for b+c discordant
    pairs up to MCNEMAR_EXACT_LIMIT, else the chi-squared approximation with
    continuity correction, (|b-c|-1)^2 / (b+c), 1 degree of freedom.
    """
    if len(outcomes_a) != len(outcomes_b):
        raise DataError(
            f"outcome length mismatch: {len(outcomes_a)} vs {len(outcomes_b)}"
        )
    b = sum(1 for x, y in zip(outcomes_a, outcomes_b) if x and not y)
    c = sum(1 for x, y in zip(outcomes_a, outcomes_b) if y and not x)
    n = b + c
    if n == 0:
        return 0, 0, 1.0
    if n <= MCNEMAR_EXACT_LIMIT:
        tail = sum(math.comb(n, i) for i in range(min(b, c) + 1))
        p = float(min(Fraction(1), 2 * Fraction(tail, 2**n)))
    else:
        statistic = (abs(b - c) - 1) ** 2 / n
        p = math.erfc(math.sqrt(statistic / 2.0))  # chi-squared survival, 1 dof
    return b, c, p


def derangement(n: int, seed: int) -> list[int]:
    """A seeded fixed-point-free permutation of range(n) (a random cycle)."""
    if n < 2:
        raise DataError(f"need at least 2 items for a derangement, got {n}")
    indices = list(range(n))
    rng = random.Random(seed)
    for i in range(n - 1, 0, -1):
        j = rng.randrange(i)  # j < i keeps the permutation one cycle
        indices[i], indices[j] = indices[j], indices[i]
    return indices


def shuffle_context(
    examples: Sequence[ContrastiveExample], seed: int
) -> list[ContrastiveExample]:
    """Permute context blocks across examples so none keeps its own context."""
    order = derangement(len(examples), seed)
    return [
        replace(
            example,
            src_context=examples[source].src_context,
            tgt_context=examples[source].tgt_context,
        )
        for example, source in zip(examples, order)
    ]


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """Corpus BLEU in [0, 100]: orders 1-4, brevity penalty, no smoothing.

    Inputs are whitespace-tokenized as given (case preserved). A zero match
    count at any order gives 0.0.
    """
    if len(hypotheses) != len(references):
        raise DataError(
            f"length mismatch: {len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise DataError("empty corpus")
    matches = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    hyp_len = 0
    ref_len = 0
    for hypothesis, reference in zip(hypotheses, references):
        hyp_tokens = hypothesis.split()
        ref_tokens = reference.split()
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for order in range(1, 5):
            hyp_grams = _ngram_counts(hyp_tokens, order)
            ref_grams = _ngram_counts(ref_tokens, order)
            totals[order - 1] += max(len(hyp_tokens) - order + 1, 0)
            matches[order - 1] += sum(
                min(count, ref_grams[gram]) for gram, count in hyp_grams.items()
            )
    if hyp_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matches, totals)) / 4.0
    brevity_penalty = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    return 100.0 * brevity_penalty * math.exp(log_precision)


# ---------------------------------------------------------------------------
# File formats


def read_examples_jsonl(path: str) -> list[ContrastiveExample]:
    """One ContrastiveExample per line, field names as in the dataclass."""
    examples = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                example = ContrastiveExample(
                    id=str(record["id"]),
                    src_sentence=record["src_sentence"],
                    src_context=tuple(record["src_context"]),
                    tgt_context=tuple(record["tgt_context"]),
                    candidates=tuple(record["candidates"]),
                    ante_distance=int(record["ante_distance"]),
                    pronoun_class=str(record["pronoun_class"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            examples.append(example)
    return examples


def read_scores(path: str) -> list[ScoreRecord]:
    """Score files: JSON lines {"id":..., "scores":[...]} or TSV (id, scores)."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                if line.startswith("{"):
                    record = json.loads(line)
                    example_id = str(record["id"])
                    scores = tuple(float(s) for s in record["scores"])
                else:
                    example_id, _, rest = line.partition("\t")
                    if not rest:
                        raise ValueError("expected 'id<TAB>space-separated scores'")
                    scores = tuple(float(s) for s in rest.split())
                records.append(ScoreRecord(example_id, scores))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return records


def write_outcomes(outcomes: Iterable[tuple[str, bool]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example_id, correct in outcomes:
            handle.write(f"{example_id}\t{1 if correct else 0}\n")


def read_outcomes(path: str) -> list[tuple[str, bool]]:
    outcomes = []
    seen = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            example_id, sep, flag = line.partition("\t")
            if sep != "\t" or flag not in ("0", "1"):
                raise DataError(f"{path}: line {lineno}: expected 'id<TAB>0|1'")
            if example_id in seen:
                raise DataError(f"{path}: line {lineno}: duplicate example id {example_id!r}")
            seen.add(example_id)
            outcomes.append((example_id, flag == "1"))
    return outcomes


def report_to_dict(report: EvalReport) -> dict:
    return {
        "n_total": report.n_total,
        "overall_accuracy": report.overall_accuracy,
        "per_distance": {
            bucket: {"accuracy": stat.accuracy, "n": stat.n}
            for bucket, stat in report.per_distance.items()
        },
        "per_class": {
            label: {"accuracy": stat.accuracy, "n": stat.n}
            for label, stat in report.per_class.items()
        },
        "score_convention": report.score_convention,
    }


def format_report_table(report: EvalReport) -> str:
    """Aligned text table: total accuracy, then distance buckets, then classes."""
    rows = [("", "accuracy", "n"), ("Total", f"{100 * report.overall_accuracy:.2f}", str(report.n_total))]
    for bucket in DISTANCE_BUCKETS:
        stat = report.per_distance.get(bucket)
        if stat is not None:
            rows.append((f"d={bucket}", f"{100 * stat.accuracy:.2f}", str(stat.n)))
    for label, stat in report.per_class.items():
        rows.append((label, f"{100 * stat.accuracy:.2f}", str(stat.n)))
    widths = [max(len(row[col]) for row in rows) for col in range(3)]
    lines = [
        "  ".join(cell.ljust(widths[col]) if col == 0 else cell.rjust(widths[col])
                  for col, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"
