"""Data model and file I/O for tokenized parallel corpora with document structure.

File formats:
  * parallel text: UTF-8, LF line endings, one sentence per line, tokens
    separated by single spaces;
  * boundary spec: one positive integer per line, the number of sentence
    pairs in each consecutive document (the sum must equal the corpus size);
  * Pharaoh alignments: per line, space-separated "j-k" pairs, 0-based,
    j indexing the source sentence and k the target sentence.

Token indices are 1-based everywhere inside the library; only the Pharaoh
file format is 0-based.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from itertools import zip_longest
from typing import Iterable, Iterator

from .errors import DataError

Link = tuple[int, int]

_WHITESPACE = re.compile(r"\s")


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence: at least one token, no whitespace inside tokens."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) == 0:
            raise DataError("sentence must contain at least one token")
        for tok in self.tokens:
            if not tok or _WHITESPACE.search(tok):
                raise DataError(f"bad token {tok!r}: empty or contains whitespace")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @classmethod
    def from_text(cls, text: str) -> "Sentence":
        return cls(tuple(text.split(" ")))


@dataclass(frozen=True)
class SentencePair:
    """An aligned source/target sentence pair with optional 1-based word links."""

    source: Sentence
    target: Sentence
    alignment: frozenset[Link] | None = None

    def __post_init__(self) -> None:
        if self.alignment is None:
            return
        for j, k in self.alignment:
            if not (1 <= j <= len(self.source) and 1 <= k <= len(self.target)):
                raise DataError(
                    f"alignment link ({j},{k}) out of range for a "
                    f"{len(self.source)}/{len(self.target)}-token pair"
                )


@dataclass(frozen=True)
class Document:
    """An ordered, non-empty run of sentence pairs sharing one context."""

    id: str
    pairs: tuple[SentencePair, ...]

    def __post_init__(self) -> None:
        if len(self.pairs) == 0:
            raise DataError(f"document {self.id!r} has no sentence pairs")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Corpus:
    """An ordered list of documents with unique ids."""

    documents: tuple[Document, ...]

    def __post_init__(self) -> None:
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise DataError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    @property
    def n_pairs(self) -> int:
        return sum(len(doc) for doc in self.documents)

    def pairs(self) -> Iterator[SentencePair]:
        for doc in self.documents:
            for pair in doc.pairs:
                yield pair


def _read_text_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        content = handle.read()
    if content == "":
        return []
    if content.endswith("\n"):
        content = content[:-1]
    return content.split("\n")


def read_boundary_spec(path: str) -> list[int]:
    """Read per-document pair counts; every line must be a positive integer."""
    counts = []
    for lineno, line in enumerate(_read_text_lines(path), start=1):
        try:
            count = int(line.strip())
        except ValueError:
            raise DataError(f"{path}: line {lineno}: malformed boundary-spec {line!r}") from None
        if count < 1:
            raise DataError(f"{path}: line {lineno}: malformed boundary-spec: count must be >= 1")
        counts.append(count)
    return counts


def parse_pharaoh_line(line: str) -> frozenset[Link]:
    """Parse one Pharaoh line into 0-based links; an empty line means no links."""
    links = set()
    for token in line.split():
        left, sep, right = token.partition("-")
        if sep != "-" or not left.isdigit() or not right.isdigit():
            raise DataError(f"malformed alignment token {token!r}")
        links.add((int(left), int(right)))
    return frozenset(links)


def format_pharaoh_line(alignment: Iterable[Link]) -> str:
    """Format 1-based links as a 0-based Pharaoh line, sorted for determinism."""
    return " ".join(f"{j - 1}-{k - 1}" for j, k in sorted(alignment))


def _parse_sentence(line: str, path: str, lineno: int) -> Sentence:
    if line == "":
        raise DataError(f"{path}: line {lineno}: empty line")
    try:
        return Sentence.from_text(line)
    except DataError as exc:
        raise DataError(f"{path}: line {lineno}: {exc}") from None


def _links_for_pair(line: str, pair: SentencePair, path: str, lineno: int) -> frozenset[Link]:
    try:
        raw = parse_pharaoh_line(line)
    except DataError as exc:
        raise DataError(f"{path}: line {lineno}: {exc}") from None
    links = frozenset((j + 1, k + 1) for j, k in raw)
    for j, k in links:
        if j > len(pair.source) or k > len(pair.target):
            raise DataError(
                f"{path}: line {lineno}: alignment index out of range: "
                f"{j - 1}-{k - 1} for a {len(pair.source)}/{len(pair.target)}-token pair"
            )
    return links


def _iter_pairs(
    source_path: str, target_path: str, alignments_path: str | None
) -> Iterator[SentencePair]:
    files = [open(source_path, encoding="utf-8"), open(target_path, encoding="utf-8")]
    if alignments_path is not None:
        files.append(open(alignments_path, encoding="utf-8"))
    try:
        for lineno, lines in enumerate(zip_longest(*files), start=1):
            if any(line is None for line in lines):
                raise DataError(
                    f"line-count mismatch between {source_path}, {target_path}"
                    + (f", {alignments_path}" if alignments_path else "")
                    + f" at line {lineno}"
                )
            lines = [line[:-1] if line.endswith("\n") else line for line in lines]
            pair = SentencePair(
                _parse_sentence(lines[0], source_path, lineno),
                _parse_sentence(lines[1], target_path, lineno),
            )
            if alignments_path is not None:
                pair = replace(pair, alignment=_links_for_pair(lines[2], pair, alignments_path, lineno))
            yield pair
    finally:
        for handle in files:
            handle.close()


def iter_documents(
    source_path: str,
    target_path: str,
    boundaries_path: str | None = None,
    alignments_path: str | None = None,
) -> Iterator[Document]:
    """Stream documents from parallel files, holding one document in memory at a time.

    Without a boundary spec the whole file is one document; empty files yield
    no documents. Document ids are "doc0", "doc1", ... in file order.
    """
    counts = read_boundary_spec(boundaries_path) if boundaries_path is not None else None
    pairs_iter = _iter_pairs(source_path, target_path, alignments_path)
    if counts is None:
        pairs = tuple(pairs_iter)
        if pairs:
            yield Document("doc0", pairs)
        return
    n_seen = 0
    for index, count in enumerate(counts):
        pairs = []
        for _ in range(count):
            try:
                pairs.append(next(pairs_iter))
            except StopIteration:
                raise DataError(
                    f"{boundaries_path}: boundary index out of range: "
                    f"documents need {sum(counts)} pairs but the corpus has {n_seen}"
                ) from None
            n_seen += 1
        yield Document(f"doc{index}", tuple(pairs))
    leftover = sum(1 for _ in pairs_iter)
    if leftover:
        raise DataError(
            f"{boundaries_path}: boundary index out of range: "
            f"documents cover {n_seen} pairs but the corpus has {n_seen + leftover}"
        )


def load_parallel(
    source_path: str, target_path: str, boundaries_path: str | None = None
) -> Corpus:
    """Load a parallel corpus; see iter_documents for the streaming variant."""
    return Corpus(tuple(iter_documents(source_path, target_path, boundaries_path)))


def synthesize_boundaries(corpus: Corpus, doc_len: int) -> Corpus:
    """Re-partition the flattened pair stream into documents of doc_len pairs.

    The last document may be shorter; pair order is preserved.
    """
    if doc_len < 1:
        raise DataError(f"doc_len must be >= 1, got {doc_len}")
    flat = list(corpus.pairs())
    documents = tuple(
        Document(f"doc{index}", tuple(flat[start : start + doc_len]))
        for index, start in enumerate(range(0, len(flat), doc_len))
    )
    return Corpus(documents)


def attach_alignments(corpus: Corpus, alignment_path: str) -> Corpus:
    """Populate every pair's alignment from a Pharaoh file in corpus order."""
    lines = _read_text_lines(alignment_path)
    if len(lines) != corpus.n_pairs:
        raise DataError(
            f"line-count mismatch: {alignment_path} has {len(lines)} lines "
            f"but the corpus has {corpus.n_pairs} pairs"
        )
    line_iter = iter(enumerate(lines, start=1))
    documents = []
    for doc in corpus.documents:
        pairs = []
        for pair in doc.pairs:
            lineno, line = next(line_iter)
            pairs.append(replace(pair, alignment=_links_for_pair(line, pair, alignment_path, lineno)))
        documents.append(Document(doc.id, tuple(pairs)))
    return Corpus(tuple(documents))


def write_parallel(
    corpus: Corpus,
    source_path: str,
    target_path: str,
    boundaries_path: str | None = None,
) -> None:
    """Write a corpus back to parallel text (and optionally a boundary spec)."""
    with open(source_path, "w", encoding="utf-8") as src, open(
        target_path, "w", encoding="utf-8"
    ) as tgt:
        for pair in corpus.pairs():
            src.write(pair.source.text + "\n")
            tgt.write(pair.target.text + "\n")
    if boundaries_path is not None:
        write_boundary_spec((len(doc) for doc in corpus.documents), boundaries_path)


def write_boundary_spec(counts: Iterable[int], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for count in counts:
            handle.write(f"{count}\n")


def write_pharaoh(corpus: Corpus, path: str) -> None:
    """Write one Pharaoh line per pair; every pair must carry an alignment."""
    with open(path, "w", encoding="utf-8") as handle:
        for index, pair in enumerate(corpus.pairs()):
            if pair.alignment is None:
                raise DataError(f"pair {index} has no alignment to write")
            handle.write(format_pharaoh_line(pair.alignment) + "\n")
