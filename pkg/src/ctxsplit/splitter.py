"""Splitting sentence pairs into two-segment sequences to densify context signal.

Both strategies return 1-based split indices (m_source, m_target): segment 1
is tokens 1..m (inclusive) and segment 2 is tokens m+1..end, on each side.

* middle-split cuts both sides at floor(length / 2);
* aligned-split starts from the middle cut, derives the target cut as the
  largest target position linked to the first source segment, and accepts a
  candidate only if no alignment link crosses the cut on exactly one side;
  otherwise it probes source cuts at growing distance from the middle
  (+delta before -delta) and falls back to middle-split when nothing within
  the search radius works.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

from .corpus import Corpus, Document, Sentence, SentencePair
from .errors import DataError


class SplitMethod(enum.Enum):
    MIDDLE = "middle"
    ALIGNED = "aligned"


@dataclass(frozen=True)
class SplitConfig:
    l_min: int = 7  # minimum source length (tokens) for a pair to be split
    method: SplitMethod = SplitMethod.MIDDLE
    max_search_radius: int = 5  # aligned-split neighborhood bound, source tokens
    zero_resource: bool = False  # each pair becomes its own standalone document
    keep_original: bool = False  # append the unsplit corpus after the split one

    def __post_init__(self) -> None:
        if self.l_min < 2:
            raise DataError(f"l_min must be >= 2, got {self.l_min}")
        if self.max_search_radius < 0:
            raise DataError(f"max_search_radius must be >= 0, got {self.max_search_radius}")


@dataclass(frozen=True)
class SegmentedPair:
    """One sentence pair split into two consecutive segment pairs."""

    first: SentencePair
    second: SentencePair
    m_source: int
    m_target: int
    used_fallback: bool


@dataclass(frozen=True)
class SplitRecord:
    """Audit entry for one split pair; pair_index is 0-based in corpus order."""

    pair_index: int
    m_source: int
    m_target: int
    used_fallback: bool


def middle_split(pair: SentencePair) -> tuple[int, int]:
    """Cut both sides at floor(length / 2)."""
    if len(pair.source) < 2 or len(pair.target) < 2:
        raise DataError(
            f"cannot split a {len(pair.source)}/{len(pair.target)}-token pair: "
            "both sides need at least 2 tokens"
        )
    return len(pair.source) // 2, len(pair.target) // 2


def _source_candidates(middle: int, radius: int, upper: int) -> Iterator[int]:
    yield middle
    for delta in range(1, radius + 1):
        for candidate in (middle + delta, middle - delta):
            if 1 <= candidate <= upper:
                yield candidate


def aligned_split(pair: SentencePair, max_search_radius: int) -> tuple[int, int, bool]:
    """Cut near the middle without separating aligned words; may fall back.

    A candidate source cut m_s induces the target cut
    m_t = max{k : (j,k) aligned, j <= m_s}. The candidate is accepted when
    m_t exists, leaves the second target segment non-empty, and every link
    (j,k) satisfies (j <= m_s) == (k <= m_t). Candidates are probed middle
    first, then at distance 1..max_search_radius (+delta before -delta);
    if none is accepted the middle cut is returned with used_fallback=True.
    """
    if pair.alignment is None:
        raise DataError("aligned split requires word alignments on the pair")
    fallback = middle_split(pair)  # also enforces the 2-token minimum per side
    links = pair.alignment
    n_source, n_target = len(pair.source), len(pair.target)
    for m_s in _source_candidates(n_source // 2, max_search_radius, n_source - 1):
        linked = [k for j, k in links if j <= m_s]
        if not linked:
            continue
        m_t = max(linked)
        if m_t >= n_target:
            continue  # would leave the second target segment empty
        if all((j <= m_s) == (k <= m_t) for j, k in links):
            return m_s, m_t, False
    return fallback[0], fallback[1], True


def split_pair(pair: SentencePair, config: SplitConfig) -> SegmentedPair | None:
    """Split one pair per the configured method; None when below l_min."""
    if len(pair.source) < config.l_min:
        return None
    if config.method is SplitMethod.ALIGNED:
        m_s, m_t, used_fallback = aligned_split(pair, config.max_search_radius)
    else:
        m_s, m_t = middle_split(pair)
        used_fallback = False
    first = SentencePair(
        Sentence(pair.source.tokens[:m_s]), Sentence(pair.target.tokens[:m_t])
    )
    second = SentencePair(
        Sentence(pair.source.tokens[m_s:]), Sentence(pair.target.tokens[m_t:])
    )
    return SegmentedPair(first, second, m_s, m_t, used_fallback)


def split_document(
    document: Document, config: SplitConfig, first_pair_index: int = 0
) -> tuple[list[Document], list[SplitRecord]]:
    """Split one document; returns output documents plus audit records.

    With zero_resource=False the document keeps its id and boundary, each
    split pair replaced in place by its two segments. With zero_resource=True
    every pair becomes its own document (id "<docid>.<n>"), two segments for
    split pairs and one pair otherwise.
    """
    records = []
    if config.zero_resource:
        documents = []
        for offset, pair in enumerate(document.pairs):
            segmented = split_pair(pair, config)
            doc_id = f"{document.id}.{offset}"
            if segmented is None:
                documents.append(Document(doc_id, (pair,)))
            else:
                documents.append(Document(doc_id, (segmented.first, segmented.second)))
                records.append(
                    SplitRecord(
                        first_pair_index + offset,
                        segmented.m_source,
                        segmented.m_target,
                        segmented.used_fallback,
                    )
                )
        return documents, records
    pairs: list[SentencePair] = []
    for offset, pair in enumerate(document.pairs):
        segmented = split_pair(pair, config)
        if segmented is None:
            pairs.append(pair)
        else:
            pairs.extend((segmented.first, segmented.second))
            records.append(
                SplitRecord(
                    first_pair_index + offset,
                    segmented.m_source,
                    segmented.m_target,
                    segmented.used_fallback,
                )
            )
    return [Document(document.id, tuple(pairs))], records


def iter_split(
    documents: Iterable[Document], config: SplitConfig
) -> Iterator[tuple[list[Document], list[SplitRecord]]]:
    """Stream (output documents, audit records) per input document."""
    pair_index = 0
    for document in documents:
        yield split_document(document, config, first_pair_index=pair_index)
        pair_index += len(document)


def split_corpus(corpus: Corpus, config: SplitConfig) -> Corpus:
    """Split every eligible pair of the corpus; see SplitConfig for the modes.

    keep_original=True appends the input documents after the split ones,
    with "-orig" suffixed to their ids to keep ids unique.
    """
    documents: list[Document] = []
    for split_docs, _ in iter_split(corpus.documents, config):
        documents.extend(split_docs)
    if config.keep_original:
        documents.extend(Document(f"{doc.id}-orig", doc.pairs) for doc in corpus.documents)
    return Corpus(tuple(documents))


def format_audit_line(record: SplitRecord) -> str:
    flag = 1 if record.used_fallback else 0
    return f"{record.pair_index}\t{record.m_source}\t{record.m_target}\t{flag}"


AUDIT_HEADER = "original_index\tm_source\tm_target\tused_fallback"


def read_audit(path: str) -> dict[int, SplitRecord]:
    """Read an audit TSV back into records keyed by original pair index."""
    records: dict[int, SplitRecord] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if lineno == 1 and line == AUDIT_HEADER:
                continue
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise DataError(f"{path}: line {lineno}: expected 4 tab-separated fields")
            try:
                index, m_s, m_t, flag = (int(f) for f in fields)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed audit entry") from None
            if index in records:
                raise DataError(f"{path}: line {lineno}: duplicate pair index {index}")
            records[index] = SplitRecord(index, m_s, m_t, bool(flag))
    return records
