"""Corpus splitting, word alignment, discourse statistics and contrastive
evaluation tools for context-aware machine translation research."""

__version__ = "0.1.0"

from .errors import DataError
from .corpus import (
    Corpus,
    Document,
    Sentence,
    SentencePair,
    attach_alignments,
    load_parallel,
    synthesize_boundaries,
)
from .aligner import AlignerConfig, TranslationTable, align_corpus, train, viterbi_align
from .splitter import (
    SegmentedPair,
    SplitConfig,
    SplitMethod,
    aligned_split,
    middle_split,
    split_corpus,
)
from .signal_stats import (
    BrokenDependencyStats,
    CorefChain,
    DependencyTree,
    DistanceHistogram,
    Mention,
    antecedent_histogram,
    broken_dependency_stats,
    remap_annotations,
)
from .harness import (
    ContrastiveExample,
    EvalReport,
    ScoreRecord,
    contrastive_accuracy,
    corpus_bleu,
    mcnemar_test,
    shuffle_context,
)

__all__ = [
    "AlignerConfig",
    "BrokenDependencyStats",
    "ContrastiveExample",
    "CorefChain",
    "Corpus",
    "DataError",
    "DependencyTree",
    "DistanceHistogram",
    "Document",
    "EvalReport",
    "Mention",
    "ScoreRecord",
    "SegmentedPair",
    "Sentence",
    "SentencePair",
    "SplitConfig",
    "SplitMethod",
    "TranslationTable",
    "align_corpus",
    "aligned_split",
    "antecedent_histogram",
    "attach_alignments",
    "broken_dependency_stats",
    "contrastive_accuracy",
    "corpus_bleu",
    "load_parallel",
    "mcnemar_test",
    "middle_split",
    "remap_annotations",
    "shuffle_context",
    "split_corpus",
    "synthesize_boundaries",
    "train",
    "viterbi_align",
]
