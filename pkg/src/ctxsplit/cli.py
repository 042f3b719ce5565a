"""Command-line entry point wiring the toolkit into reproducible pipeline steps.

Exit codes: 0 success, 1 usage error, 2 data error. Every subcommand is a
pure function of its input files and flags; seeded randomness only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from . import __version__
from .aligner import AlignerConfig, align_corpus
from .corpus import (
    Document,
    Sentence,
    SentencePair,
    iter_documents,
    load_parallel,
    read_boundary_spec,
    write_boundary_spec,
    write_pharaoh,
)
from .errors import DataError
from .harness import (
    contrastive_accuracy,
    corpus_bleu,
    derangement,
    example_outcomes,
    format_report_table,
    mcnemar_test,
    read_examples_jsonl,
    read_outcomes,
    read_scores,
    report_to_dict,
    write_outcomes,
)
from .signal_stats import (
    antecedent_histogram,
    broken_dependency_stats,
    broken_table,
    histogram_table,
    mark_pronouns,
    read_conllu,
    read_coref_jsonl,
    remap_annotations,
)
from .splitter import (
    AUDIT_HEADER,
    SplitConfig,
    SplitMethod,
    format_audit_line,
    iter_split,
    read_audit,
)

log = logging.getLogger("ctxsplit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 instead of argparse's 2
        raise UsageError(message)


def _require_files(*paths: str | None) -> None:
    for path in paths:
        if path is not None and not os.path.isfile(path):
            raise DataError(f"{path}: no such file")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _dump_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        _write_text(path, text)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_split(args: argparse.Namespace) -> int:
    _require_files(args.src, args.tgt, args.docs, args.alignments)
    config = SplitConfig(
        l_min=args.lmin,
        method=SplitMethod(args.method),
        max_search_radius=args.radius,
        zero_resource=args.zero_resource,
        keep_original=args.keep_original,
    )
    if config.method is SplitMethod.ALIGNED and args.alignments is None:
        raise DataError("--method aligned requires --alignments")
    out_src = f"{args.out_prefix}.src"
    out_tgt = f"{args.out_prefix}.tgt"
    out_docs = f"{args.out_prefix}.docs"
    out_audit = f"{args.out_prefix}.audit.tsv"
    n_split = 0
    n_out = 0
    with open(out_src, "w", encoding="utf-8") as src, open(
        out_tgt, "w", encoding="utf-8"
    ) as tgt, open(out_docs, "w", encoding="utf-8") as docs, open(
        out_audit, "w", encoding="utf-8"
    ) as audit:
        audit.write(AUDIT_HEADER + "\n")

        def emit(documents) -> None:
            nonlocal n_out
            for document in documents:
                for pair in document.pairs:
                    src.write(pair.source.text + "\n")
                    tgt.write(pair.target.text + "\n")
                docs.write(f"{len(document)}\n")
                n_out += len(document)

        stream = iter_documents(args.src, args.tgt, args.docs, args.alignments)
        for split_docs, records in iter_split(stream, config):
            emit(split_docs)
            for record in records:
                audit.write(format_audit_line(record) + "\n")
            n_split += len(records)
        if config.keep_original:
            for document in iter_documents(args.src, args.tgt, args.docs):
                emit([Document(f"{document.id}-orig", document.pairs)])
    log.info("split %d pairs; wrote %d pairs to %s.{src,tgt,docs}", n_split, n_out, args.out_prefix)
    return 0


def cmd_align(args: argparse.Namespace) -> int:
    _require_files(args.src, args.tgt)
    config = AlignerConfig(
        iterations=args.iterations,
        use_diagonal_prior=args.diagonal_prior,
        diagonal_tension=args.diagonal_tension,
        include_null=not args.no_null,
        seed=args.seed,
    )
    corpus = load_parallel(args.src, args.tgt)
    aligned = align_corpus(corpus, config, threads=args.threads)
    write_pharaoh(aligned, args.out)
    return 0


def _count_lines(path: str) -> int:
    with open(path, encoding="utf-8") as handle:
        return sum(1 for _ in handle)


def cmd_synth_docs(args: argparse.Namespace) -> int:
    _require_files(args.src, args.tgt)
    if args.doc_len < 1:
        raise DataError(f"--doc-len must be >= 1, got {args.doc_len}")
    n_src = _count_lines(args.src)
    n_tgt = _count_lines(args.tgt)
    if n_src != n_tgt:
        raise DataError(
            f"line-count mismatch: {args.src} has {n_src} lines, {args.tgt} has {n_tgt}"
        )
    counts = []
    remaining = n_src
    while remaining > 0:
        counts.append(min(args.doc_len, remaining))
        remaining -= args.doc_len
    write_boundary_spec(counts, args.out_docs)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    _require_files(args.conllu, args.coref, args.split_audit, args.docs)
    boundary_counts = read_boundary_spec(args.docs) if args.docs else None
    documents = read_conllu(args.conllu, boundary_counts)
    if not documents:
        raise DataError(f"{args.conllu}: no sentences")
    chains = read_coref_jsonl(args.coref)
    if args.pronouns_from_upos:
        chains = mark_pronouns(chains, {doc.id: doc for doc in documents})

    audit = read_audit(args.split_audit) if args.split_audit else None
    if audit:
        n_sentences = sum(len(doc.sentences) for doc in documents)
        if max(audit) >= n_sentences:
            raise DataError(
                f"{args.split_audit}: pair index {max(audit)} out of range for "
                f"{n_sentences} sentences in {args.conllu}"
            )
    split_points_by_doc: dict[str, list[int | None]] = {}
    sentence_index = 0
    for document in documents:
        points: list[int | None] = []
        for sentence in document.sentences:
            if audit is not None:
                record = audit.get(sentence_index)
                points.append(record.m_source if record is not None else None)
            elif len(sentence.forms) >= args.lmin:
                points.append(len(sentence.forms) // 2)
            else:
                points.append(None)
            sentence_index += 1
        split_points_by_doc[document.id] = points

    units_before = {
        doc.id: [len(s.forms) for s in doc.sentences] for doc in documents
    }
    chains_by_doc: dict[str, list] = {}
    for chain in chains:
        chains_by_doc.setdefault(chain.doc_id, []).append(chain)
    units_after = {}
    chains_after = []
    for document in documents:
        pairs = tuple(
            SentencePair(Sentence(s.forms), Sentence(s.forms)) for s in document.sentences
        )
        remapped = remap_annotations(
            Document(document.id, pairs),
            split_points_by_doc[document.id],
            chains_by_doc.get(document.id, []),
            trees=[s.tree for s in document.sentences],
        )
        units_after[document.id] = list(remapped.unit_lengths)
        chains_after.extend(remapped.chains)

    before = antecedent_histogram(units_before, chains, args.d_max)
    after = antecedent_histogram(units_after, chains_after, args.d_max)
    broken = broken_dependency_stats(
        [s.forms for doc in documents for s in doc.sentences],
        [s.tree for doc in documents for s in doc.sentences],
        [p for doc in documents for p in split_points_by_doc[doc.id]],
    )
    _write_text(f"{args.out_prefix}.antecedents.orig.tsv", histogram_table(before))
    _write_text(f"{args.out_prefix}.antecedents.split.tsv", histogram_table(after))
    _write_text(f"{args.out_prefix}.broken_deps.tsv", broken_table(broken))
    return 0


def cmd_eval_contrastive(args: argparse.Namespace) -> int:
    _require_files(args.testset, args.scores)
    examples = read_examples_jsonl(args.testset)
    scores = read_scores(args.scores)
    report = contrastive_accuracy(examples, scores)
    _dump_json(report_to_dict(report), args.report)
    if args.outcomes:
        write_outcomes(example_outcomes(examples, scores), args.outcomes)
    if args.table:
        sys.stdout.write(format_report_table(report))
    return 0


def cmd_mcnemar(args: argparse.Namespace) -> int:
    _require_files(args.outcomes_a, args.outcomes_b)
    outcomes_a = read_outcomes(args.outcomes_a)
    outcomes_b = dict(read_outcomes(args.outcomes_b))
    if len(outcomes_a) != len(outcomes_b):
        raise DataError(
            f"outcome files pair {len(outcomes_a)} vs {len(outcomes_b)} examples"
        )
    paired_a = []
    paired_b = []
    for example_id, outcome in outcomes_a:
        if example_id not in outcomes_b:
            raise DataError(f"example {example_id!r} missing from {args.outcomes_b}")
        paired_a.append(outcome)
        paired_b.append(outcomes_b[example_id])
    b, c, p_value = mcnemar_test(paired_a, paired_b)
    _dump_json({"b": b, "c": c, "n_discordant": b + c, "p_value": p_value}, args.report)
    return 0


def cmd_shuffle_context(args: argparse.Namespace) -> int:
    _require_files(args.testset)
    records = []
    with open(args.testset, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if line:
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{args.testset}: line {lineno}: {exc}") from None
    read_examples_jsonl(args.testset)  # full validation with line diagnostics
    order = derangement(len(records), args.seed)
    with open(args.out, "w", encoding="utf-8") as handle:
        for record, source in zip(records, order):
            shuffled = dict(record)
            shuffled["src_context"] = records[source]["src_context"]
            shuffled["tgt_context"] = records[source]["tgt_context"]
            handle.write(json.dumps(shuffled, sort_keys=True, ensure_ascii=False) + "\n")
    return 0


def cmd_bleu(args: argparse.Namespace) -> int:
    _require_files(args.hyp, args.ref)
    with open(args.hyp, encoding="utf-8") as handle:
        hypotheses = [line.rstrip("\n") for line in handle]
    with open(args.ref, encoding="utf-8") as handle:
        references = [line.rstrip("\n") for line in handle]
    score = corpus_bleu(hypotheses, references)
    sys.stdout.write(f"BLEU = {score:.2f}\n")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="ctxsplit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="seed for any randomized step")
    parser.add_argument("--threads", type=int, default=1, help="internal parallelism bound")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    commands = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    commands.required = True

    split = commands.add_parser("split", help="split sentence pairs into two segments")
    split.add_argument("--method", choices=[m.value for m in SplitMethod], default="middle")
    split.add_argument("--lmin", type=int, default=7, help="minimum source length to split")
    split.add_argument("--radius", type=int, default=5, help="aligned-split search radius")
    split.add_argument("--src", required=True, help="tokenized source text")
    split.add_argument("--tgt", required=True, help="tokenized target text")
    split.add_argument("--docs", help="boundary spec (pairs per document)")
    split.add_argument("--alignments", help="Pharaoh alignments, one line per pair")
    split.add_argument("--zero-resource", action="store_true",
                       help="one standalone document per input pair")
    split.add_argument("--keep-original", action="store_true",
                       help="append the unsplit corpus after the split one")
    split.add_argument("--out-prefix", required=True,
                       help="writes PREFIX.src, PREFIX.tgt, PREFIX.docs, PREFIX.audit.tsv")
    split.set_defaults(func=cmd_split)

    align = commands.add_parser("align", help="train IBM-1 and write Viterbi alignments")
    align.add_argument("--src", required=True)
    align.add_argument("--tgt", required=True)
    align.add_argument("--out", required=True, help="Pharaoh output path")
    align.add_argument("--iterations", type=int, default=5)
    align.add_argument("--diagonal-prior", action="store_true",
                       help="weight candidates toward the diagonal")
    align.add_argument("--diagonal-tension", type=float, default=4.0)
    align.add_argument("--no-null", action="store_true", help="disable the empty word")
    align.set_defaults(func=cmd_align)

    synth = commands.add_parser("synth-docs", help="write artificial document boundaries")
    synth.add_argument("--src", required=True)
    synth.add_argument("--tgt", required=True)
    synth.add_argument("--doc-len", type=int, required=True,
                       help="pairs per artificial document (no default)")
    synth.add_argument("--out-docs", required=True)
    synth.set_defaults(func=cmd_synth_docs)

    stats = commands.add_parser("stats", help="antecedent and broken-dependency statistics")
    stats.add_argument("--conllu", required=True, help="dependency parses, CoNLL-U")
    stats.add_argument("--coref", required=True, help="coreference chains, JSON lines")
    stats.add_argument("--docs", help="boundary spec overriding # newdoc comments")
    stats.add_argument("--lmin", type=int, default=7,
                       help="middle-split sentences of at least this length")
    stats.add_argument("--split-audit",
                       help="audit TSV from the split subcommand instead of --lmin")
    stats.add_argument("--d-max", type=int, default=3, help="largest tracked distance")
    stats.add_argument("--pronouns-from-upos", action="store_true",
                       help="flag pronoun mentions via UPOS=PRON")
    stats.add_argument("--out-prefix", required=True)
    stats.set_defaults(func=cmd_stats)

    evalc = commands.add_parser("eval-contrastive", help="contrastive ranking accuracy")
    evalc.add_argument("--testset", required=True, help="ContrastiveExample JSON lines")
    evalc.add_argument("--scores", required=True, help="model scores, JSON lines or TSV")
    evalc.add_argument("--report", help="JSON report path (default: stdout)")
    evalc.add_argument("--outcomes", help="write per-example outcomes TSV for mcnemar")
    evalc.add_argument("--table", action="store_true", help="print the aligned text table")
    evalc.set_defaults(func=cmd_eval_contrastive)

    mcnemar = commands.add_parser("mcnemar", help="paired McNemar significance test")
    mcnemar.add_argument("--outcomes-a", required=True)
    mcnemar.add_argument("--outcomes-b", required=True)
    mcnemar.add_argument("--report", help="JSON output path (default: stdout)")
    mcnemar.set_defaults(func=cmd_mcnemar)

    shuffle = commands.add_parser("shuffle-context", help="derange context blocks across examples")
    shuffle.add_argument("--testset", required=True)
    shuffle.add_argument("--out", required=True)
    shuffle.set_defaults(func=cmd_shuffle_context)

    bleu = commands.add_parser("bleu", help="corpus BLEU of hypotheses against references")
    bleu.add_argument("--hyp", required=True)
    bleu.add_argument("--ref", required=True)
    bleu.set_defaults(func=cmd_bleu)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"error: {exc}\n")
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DataError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
