import random

import pytest

from ctxsplit.corpus import Corpus, Document, Sentence, SentencePair


def make_pair(src: str, tgt: str, links=None) -> SentencePair:
    alignment = frozenset(links) if links is not None else None
    return SentencePair(Sentence.from_text(src), Sentence.from_text(tgt), alignment)


def make_corpus(*docs: tuple[str, list[tuple[str, str]]]) -> Corpus:
    documents = tuple(
        Document(doc_id, tuple(make_pair(s, t) for s, t in pairs))
        for doc_id, pairs in docs
    )
    return Corpus(documents)


def random_sentence(rng: random.Random, length: int, vocab: int = 200) -> str:
    return " ".join(f"w{rng.randrange(vocab)}" for _ in range(length))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240901)
