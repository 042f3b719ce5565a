"""Contextual-signal statistics from dependency and coreference annotations.

Quantifies how much context-dependent material a corpus contains, before and
after splitting: where coreference antecedents sit relative to each mention
(distance in sentences or segments), and how often a split separates the
sentence root from one of its direct dependents.

Annotation inputs:
  * dependencies: CoNLL-U, columns ID/FORM/UPOS/HEAD/DEPREL used, blank-line
    sentence separation, documents delimited by "# newdoc" comments or an
    external boundary spec;
  * coreference: JSON lines, one chain per line,
    {"doc": id, "mentions": [{"sent": int, "start": int, "end": int,
    "pronoun": bool}]}, all indices 1-based, spans inclusive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, Document
from .errors import DataError

# Universal Dependencies label groups for root dependents; CoNLL-U subtypes
# ("nsubj:pass") are matched on their base label.
DEFAULT_RELATION_GROUPS: dict[str, frozenset[str]] = {
    "subj_obj": frozenset({"nsubj", "csubj", "obj", "iobj"}),
    "complement": frozenset({"ccomp", "xcomp", "obl"}),
    "modifier": frozenset({"advmod", "amod", "nmod", "nummod", "acl", "advcl"}),
}
DEFAULT_PUNCTUATION_LABELS = frozenset({"punct"})


@dataclass(frozen=True)
class DependencyTree:
    """One (child, head, relation) arc per token, 1-based; head 0 is the root."""

    arcs: tuple[tuple[int, int, str], ...]

    def __post_init__(self) -> None:
        n = len(self.arcs)
        if n == 0:
            raise DataError("dependency tree has no arcs")
        heads = {}
        for child, head, _ in self.arcs:
            if child in heads:
                raise DataError(f"token {child} has two heads")
            if not (1 <= child <= n) or not (0 <= head <= n):
                raise DataError(f"arc ({child},{head}) out of range for {n} tokens")
            heads[child] = head
        if len(heads) != n:
            raise DataError("every token needs exactly one head")
        if sum(1 for head in heads.values() if head == 0) != 1:
            raise DataError("tree must have exactly one root")
        for child in heads:
            seen = set()
            node = child
            while node != 0:
                if node in seen:
                    raise DataError(f"dependency cycle through token {child}")
                seen.add(node)
                node = heads[node]

    def __len__(self) -> int:
        return len(self.arcs)

    @property
    def root(self) -> int:
        return next(child for child, head, _ in self.arcs if head == 0)

    def root_dependents(self) -> list[tuple[int, str]]:
        """(position, relation) of every direct dependent of the root token."""
        root = self.root
        return [(child, rel) for child, head, rel in self.arcs if head == root]


@dataclass(frozen=True)
class Mention:
    """A mention span, 1-based and inclusive, inside one unit of a document."""

    sent: int
    start: int
    end: int
    is_pronoun: bool = False
    truncated: bool = False  # span was cut at a segment boundary by remapping

    def __post_init__(self) -> None:
        if self.sent < 1 or self.start < 1 or self.end < self.start:
            raise DataError(f"bad mention span sent={self.sent} [{self.start},{self.end}]")


@dataclass(frozen=True)
class CorefChain:
    """At least two mentions of one entity, ordered by document position."""

    doc_id: str
    mentions: tuple[Mention, ...]

    def __post_init__(self) -> None:
        if len(self.mentions) < 2:
            raise DataError(f"chain in {self.doc_id!r} needs >= 2 mentions")
        keys = [(m.sent, m.start) for m in self.mentions]
        if keys != sorted(keys):
            raise DataError(f"chain in {self.doc_id!r} is not ordered by position")


@dataclass(frozen=True)
class DistanceHistogram:
    """Antecedent counts per distance, with token-normalized densities.

    The density at distance d divides the count by (d+1) * mean_unit_length:
    the number of tokens a model must attend to for resolving a mention whose
    antecedent is d units back.
    """

    counts_all: Mapping[int, int]
    counts_pronoun: Mapping[int, int]
    mean_unit_length: float
    dropped: int = 0  # antecedents farther away than the histogram range

    @property
    def normalized(self) -> dict[int, float]:
        return {
            d: count / ((d + 1) * self.mean_unit_length)
            for d, count in self.counts_all.items()
        }

    @property
    def normalized_pronoun(self) -> dict[int, float]:
        return {
            d: count / ((d + 1) * self.mean_unit_length)
            for d, count in self.counts_pronoun.items()
        }


def unit_lengths_by_doc(corpus: Corpus) -> dict[str, list[int]]:
    """Source-side token count per unit, keyed by document id."""
    return {
        doc.id: [len(pair.source) for pair in doc.pairs] for doc in corpus.documents
    }


def _check_mention(mention: Mention, units: Sequence[int], doc_id: str) -> None:
    if mention.sent > len(units):
        raise DataError(
            f"mention in unit {mention.sent} of {doc_id!r}, which has {len(units)} units"
        )
    if mention.end > units[mention.sent - 1]:
        raise DataError(
            f"mention span [{mention.start},{mention.end}] exceeds the "
            f"{units[mention.sent - 1]}-token unit {mention.sent} of {doc_id!r}"
        )


def antecedent_histogram(
    units_by_doc: Mapping[str, Sequence[int]],
    chains: Iterable[CorefChain],
    d_max: int,
) -> DistanceHistogram:
    """Count, per distance 0..d_max, mentions whose nearest preceding mention
    of the same chain sits that many units back; farther ones are dropped.

    units_by_doc maps document id to per-unit token counts; the mean unit
    length is taken over all units of all documents given.
    """
    if d_max < 0:
        raise DataError(f"d_max must be >= 0, got {d_max}")
    counts_all = {d: 0 for d in range(d_max + 1)}
    counts_pronoun = {d: 0 for d in range(d_max + 1)}
    dropped = 0
    for chain in chains:
        units = units_by_doc.get(chain.doc_id)
        if units is None:
            raise DataError(f"chain references unknown document {chain.doc_id!r}")
        for mention in chain.mentions:
            _check_mention(mention, units, chain.doc_id)
        for previous, mention in zip(chain.mentions, chain.mentions[1:]):
            distance = mention.sent - previous.sent
            if distance > d_max:
                dropped += 1
                continue
            counts_all[distance] += 1
            if mention.is_pronoun:
                counts_pronoun[distance] += 1
    n_units = sum(len(units) for units in units_by_doc.values())
    if n_units == 0:
        raise DataError("no units to compute the mean unit length from")
    total_tokens = sum(sum(units) for units in units_by_doc.values())
    return DistanceHistogram(
        counts_all, counts_pronoun, total_tokens / n_units, dropped
    )


@dataclass(frozen=True)
class RemappedAnnotations:
    """Annotations of one document re-expressed in post-split segment units."""

    doc_id: str
    chains: tuple[CorefChain, ...]
    unit_lengths: tuple[int, ...]
    # unit u (1-based) covers original sentence _unit_sentence[u-1] starting
    # at token offset _unit_offset[u-1]
    _unit_sentence: tuple[int, ...] = field(repr=False)
    _unit_offset: tuple[int, ...] = field(repr=False)
    _first_unit: tuple[int, ...] = field(repr=False)
    _split_points: tuple[int | None, ...] = field(repr=False)

    def to_unit(self, sent: int, token: int) -> tuple[int, int]:
        """Map an original (sentence, token) position into (unit, token)."""
        if not (1 <= sent <= len(self._first_unit)):
            raise DataError(f"sentence {sent} out of range")
        first = self._first_unit[sent - 1]
        split = self._split_points[sent - 1]
        length = self.unit_lengths[first - 1] + (
            self.unit_lengths[first] if split is not None else 0
        )
        if not (1 <= token <= length):
            raise DataError(f"token {token} out of range for sentence {sent}")
        if split is None or token <= split:
            return first, token
        return first + 1, token - split

    def to_original(self, unit: int, token: int) -> tuple[int, int]:
        """Inverse of to_unit."""
        if not (1 <= unit <= len(self.unit_lengths)):
            raise DataError(f"unit {unit} out of range")
        if not (1 <= token <= self.unit_lengths[unit - 1]):
            raise DataError(f"token {token} out of range for unit {unit}")
        return self._unit_sentence[unit - 1], self._unit_offset[unit - 1] + token


def remap_annotations(
    document: Document,
    split_points: Sequence[int | None],
    chains: Iterable[CorefChain],
    trees: Sequence[DependencyTree | None] | None = None,
) -> RemappedAnnotations:
    """Re-express chains in segment coordinates after splitting a document.

    split_points gives the source cut per sentence (None = unsplit). Tokens
    1..m stay in the first segment; later tokens move to the second one at
    offset token-m. A mention span crossing the cut is truncated to its part
    in the first segment (the one holding the span's first token) and
    flagged. trees, when given, are only validated against sentence lengths;
    root-dependency breakage is computed on original coordinates by
    broken_dependency_stats.
    """
    lengths = [len(pair.source) for pair in document.pairs]
    if len(split_points) != len(lengths):
        raise DataError(
            f"{len(split_points)} split points for {len(lengths)} sentences "
            f"in {document.id!r}"
        )
    for sent_no, (split, length) in enumerate(zip(split_points, lengths), start=1):
        if split is not None and not (1 <= split < length):
            raise DataError(
                f"split point {split} inconsistent with the {length}-token "
                f"sentence {sent_no} of {document.id!r}"
            )
    if trees is not None:
        if len(trees) != len(lengths):
            raise DataError(f"{len(trees)} trees for {len(lengths)} sentences")
        for sent_no, (tree, length) in enumerate(zip(trees, lengths), start=1):
            if tree is not None and len(tree) != length:
                raise DataError(
                    f"tree of sentence {sent_no} has {len(tree)} tokens, expected {length}"
                )

    unit_lengths: list[int] = []
    unit_sentence: list[int] = []
    unit_offset: list[int] = []
    first_unit: list[int] = []
    for sent_no, (split, length) in enumerate(zip(split_points, lengths), start=1):
        first_unit.append(len(unit_lengths) + 1)
        if split is None:
            unit_lengths.append(length)
            unit_sentence.append(sent_no)
            unit_offset.append(0)
        else:
            unit_lengths.extend((split, length - split))
            unit_sentence.extend((sent_no, sent_no))
            unit_offset.extend((0, split))

    remapped_chains = []
    for chain in chains:
        if chain.doc_id != document.id:
            raise DataError(
                f"chain for document {chain.doc_id!r} passed with {document.id!r}"
            )
        mentions = []
        for mention in chain.mentions:
            if mention.sent > len(lengths) or mention.end > lengths[mention.sent - 1]:
                raise DataError(
                    f"mention sent={mention.sent} [{mention.start},{mention.end}] "
                    f"out of range in {document.id!r}"
                )
            split = split_points[mention.sent - 1]
            unit, start = _to_unit(first_unit, split, mention.sent, mention.start)
            if split is not None and mention.start <= split < mention.end:
                mentions.append(
                    replace(mention, sent=unit, start=start, end=split, truncated=True)
                )
            else:
                _, end = _to_unit(first_unit, split, mention.sent, mention.end)
                mentions.append(replace(mention, sent=unit, start=start, end=end))
        remapped_chains.append(CorefChain(chain.doc_id, tuple(mentions)))

    return RemappedAnnotations(
        document.id,
        tuple(remapped_chains),
        tuple(unit_lengths),
        tuple(unit_sentence),
        tuple(unit_offset),
        tuple(first_unit),
        tuple(split_points),
    )


def _to_unit(
    first_unit: Sequence[int], split: int | None, sent: int, token: int
) -> tuple[int, int]:
    first = first_unit[sent - 1]
    if split is None or token <= split:
        return first, token
    return first + 1, token - split


@dataclass(frozen=True)
class GroupStat:
    count: int
    percentage: float


@dataclass(frozen=True)
class BrokenDependencyStats:
    """Per relation group: sentences whose split breaks a root dependency."""

    groups: Mapping[str, GroupStat]
    n_sentences: int


def broken_dependency_stats(
    sentences: Corpus | Iterable[Sequence[str]],
    trees: Sequence[DependencyTree | None],
    split_points: Sequence[int | None],
    relation_groups: Mapping[str, frozenset[str]] | None = None,
    punctuation_labels: frozenset[str] = DEFAULT_PUNCTUATION_LABELS,
) -> BrokenDependencyStats:
    """Count sentences where the cut separates the root from a dependent.

    A root dependency (root token -> direct dependent, relation r) is broken
    when the two tokens land in different segments. A sentence counts for
    group g when any of its broken root dependencies has its base relation
    label in relation_groups[g]; the always-present "any" group accepts every
    relation except punctuation_labels. Percentages are over all sentences
    given (unsplit sentences never count as broken).
    """
    if relation_groups is None:
        relation_groups = DEFAULT_RELATION_GROUPS
    if isinstance(sentences, Corpus):
        token_lists: list[Sequence[str]] = [p.source.tokens for p in sentences.pairs()]
    else:
        token_lists = list(sentences)
    n = len(token_lists)
    if len(trees) != n or len(split_points) != n:
        raise DataError(
            f"{len(trees)} trees / {len(split_points)} split points for {n} sentences"
        )
    group_names = list(relation_groups) + ["any"]
    counts = {name: 0 for name in group_names}
    for sent_no, (tokens, tree, split) in enumerate(
        zip(token_lists, trees, split_points), start=1
    ):
        if split is None:
            continue
        if tree is None:
            raise DataError(f"missing dependency tree for split sentence {sent_no}")
        if len(tree) != len(tokens):
            raise DataError(
                f"tree of sentence {sent_no} has {len(tree)} tokens, "
                f"expected {len(tokens)}"
            )
        if not (1 <= split < len(tokens)):
            raise DataError(f"split point {split} out of range in sentence {sent_no}")
        root = tree.root
        broken = [
            rel.split(":")[0]
            for child, rel in tree.root_dependents()
            if (child <= split) != (root <= split)
        ]
        for name, labels in relation_groups.items():
            if any(rel in labels for rel in broken):
                counts[name] += 1
        if any(rel not in punctuation_labels for rel in broken):
            counts["any"] += 1
    groups = {
        name: GroupStat(count, 100.0 * count / n if n else 0.0)
        for name, count in counts.items()
    }
    return BrokenDependencyStats(groups, n)


# ---------------------------------------------------------------------------
# Annotation file readers


@dataclass(frozen=True)
class AnnotatedSentence:
    forms: tuple[str, ...]
    upos: tuple[str, ...]
    tree: DependencyTree


@dataclass(frozen=True)
class AnnotatedDocument:
    id: str
    sentences: tuple[AnnotatedSentence, ...]


def _finish_sentence(rows: list[tuple[int, str, str, int, str]], path: str, lineno: int):
    ids = [row[0] for row in rows]
    if ids != list(range(1, len(rows) + 1)):
        raise DataError(f"{path}: line {lineno}: token ids are not consecutive from 1")
    forms = tuple(row[1] for row in rows)
    upos = tuple(row[2] for row in rows)
    arcs = tuple((row[0], row[3], row[4]) for row in rows)
    try:
        tree = DependencyTree(arcs)
    except DataError as exc:
        raise DataError(f"{path}: line {lineno}: {exc}") from None
    return AnnotatedSentence(forms, upos, tree)


def read_conllu(
    path: str, boundary_counts: Sequence[int] | None = None
) -> list[AnnotatedDocument]:
    """Read CoNLL-U; multiword-token and empty-node rows are skipped.

    Document boundaries come from "# newdoc" comments, or from
    boundary_counts (pairs per document) when given, which overrides the
    comments. Without either, the whole file is one document.
    """
    sentences: list[AnnotatedSentence] = []
    doc_starts: list[tuple[int, str]] = []  # (sentence index, doc id)
    rows: list[tuple[int, str, str, int, str]] = []
    pending_doc: str | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                comment = line[1:].strip()
                if comment == "newdoc" or comment.startswith("newdoc "):
                    _, _, doc_id = comment.partition("=")
                    pending_doc = doc_id.strip() or f"doc{len(doc_starts)}"
                continue
            if line == "":
                if rows:
                    if pending_doc is not None or not doc_starts:
                        doc_starts.append((len(sentences), pending_doc or "doc0"))
                        pending_doc = None
                    sentences.append(_finish_sentence(rows, path, lineno))
                    rows = []
                continue
            fields = line.split("\t")
            if len(fields) < 8:
                raise DataError(f"{path}: line {lineno}: expected >= 8 tab-separated columns")
            token_id, form, upos, head, deprel = (
                fields[0], fields[1], fields[3], fields[6], fields[7],
            )
            if not token_id.isdigit():
                continue  # multiword-token ranges ("1-2") and empty nodes ("1.1")
            if not head.isdigit():
                raise DataError(f"{path}: line {lineno}: malformed HEAD {head!r}")
            rows.append((int(token_id), form, upos, int(head), deprel))
        if rows:
            if pending_doc is not None or not doc_starts:
                doc_starts.append((len(sentences), pending_doc or "doc0"))
            sentences.append(_finish_sentence(rows, path, lineno + 1))
    if not sentences:
        return []
    if boundary_counts is not None:
        if sum(boundary_counts) != len(sentences):
            raise DataError(
                f"{path}: boundary-spec covers {sum(boundary_counts)} sentences, "
                f"file has {len(sentences)}"
            )
        documents = []
        start = 0
        for index, count in enumerate(boundary_counts):
            documents.append(
                AnnotatedDocument(f"doc{index}", tuple(sentences[start : start + count]))
            )
            start += count
        return documents
    documents = []
    bounds = doc_starts + [(len(sentences), "")]
    for (start, doc_id), (stop, _) in zip(bounds, bounds[1:]):
        documents.append(AnnotatedDocument(doc_id, tuple(sentences[start:stop])))
    return documents


def read_coref_jsonl(path: str) -> list[CorefChain]:
    """Read coreference chains; a missing "pronoun" key defaults to false."""
    chains = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                doc_id = record["doc"]
                mentions = tuple(
                    Mention(
                        sent=int(m["sent"]),
                        start=int(m["start"]),
                        end=int(m["end"]),
                        is_pronoun=bool(m.get("pronoun", False)),
                    )
                    for m in record["mentions"]
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            try:
                chains.append(CorefChain(doc_id, mentions))
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return chains


def mark_pronouns(
    chains: Iterable[CorefChain], documents: Mapping[str, AnnotatedDocument]
) -> list[CorefChain]:
    """Set is_pronoun from the UPOS of each mention's first token (PRON)."""
    marked = []
    for chain in chains:
        document = documents.get(chain.doc_id)
        if document is None:
            raise DataError(f"chain references unknown document {chain.doc_id!r}")
        mentions = []
        for mention in chain.mentions:
            if mention.sent > len(document.sentences):
                raise DataError(
                    f"mention in unit {mention.sent} of {chain.doc_id!r}, which has "
                    f"{len(document.sentences)} sentences"
                )
            sentence = document.sentences[mention.sent - 1]
            if mention.end > len(sentence.forms):
                raise DataError(
                    f"mention span [{mention.start},{mention.end}] exceeds sentence "
                    f"{mention.sent} of {chain.doc_id!r}"
                )
            is_pron = sentence.upos[mention.start - 1] == "PRON"
            mentions.append(replace(mention, is_pronoun=is_pron))
        marked.append(CorefChain(chain.doc_id, tuple(mentions)))
    return marked


# ---------------------------------------------------------------------------
# Report tables


def histogram_table(histogram: DistanceHistogram) -> str:
    """TSV: distance, tokens attended at that distance, all / pronoun counts."""
    lines = ["distance\ttokens\tall\tpronouns"]
    for d in sorted(histogram.counts_all):
        tokens = (d + 1) * histogram.mean_unit_length
        lines.append(
            f"{d}\t{tokens:.2f}\t{histogram.counts_all[d]}\t{histogram.counts_pronoun[d]}"
        )
    return "\n".join(lines) + "\n"


def broken_table(stats: BrokenDependencyStats) -> str:
    """TSV: relation group, sentences with a broken root dependency, percentage."""
    lines = ["group\tsentences\tpercentage"]
    for name, stat in stats.groups.items():
        lines.append(f"{name}\t{stat.count}\t{stat.percentage:.2f}")
    return "\n".join(lines) + "\n"
