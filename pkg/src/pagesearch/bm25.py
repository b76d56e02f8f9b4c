"""Okapi BM25 over page text transcriptions.

Tokenizer: lowercase, Unicode-alphanumeric runs (underscore excluded), no
stemming, no stopwords. IDF = ln(1 + (N - df + 0.5)/(df + 0.5)) with k1=1.2,
b=0.75 defaults. Zero-length documents never match; only pages with at least
one matching term appear in results.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .corpus import CorpusHandle
from .ranking import RankedList

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(ordinal, tf)], ordinal-sorted
    doc_lengths: list[int]
    avg_doc_length: float
    doc_count: int
    page_ids: list[str] = field(default_factory=list)  # ordinal -> page_id

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


def build_index(corpus: CorpusHandle) -> InvertedIndex:
    """Index pages in page_id order; ordinals are positions in that order, so
    two builds of the same corpus (however the input file was permuted) agree."""
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    page_ids: list[str] = []
    for ordinal, page in enumerate(corpus.pages):
        tokens = tokenize(page.text)
        doc_lengths.append(len(tokens))
        page_ids.append(page.page_id)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((ordinal, tf))
    n = len(doc_lengths)
    avg = sum(doc_lengths) / n if n else 0.0
    return InvertedIndex(postings, doc_lengths, avg, n, page_ids)


def bm25_search(
    index: InvertedIndex,
    query_text: str,
    params: Bm25Params = Bm25Params(),
    top_n: int | None = None,
) -> RankedList:
    """Score Okapi BM25; each query-token occurrence contributes independently,
    so a duplicated term doubles its contribution."""
    scores: dict[int, float] = {}
    k1, b = params.k1, params.b
    avgdl = index.avg_doc_length
    for term in tokenize(query_text):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for ordinal, tf in plist:
            dl = index.doc_lengths[ordinal]
            norm = 1.0 - b + b * (dl / avgdl) if avgdl > 0 else 1.0
            scores[ordinal] = scores.get(ordinal, 0.0) + idf * (
                tf * (k1 + 1.0) / (tf + k1 * norm)
            )
    by_page = {index.page_ids[o]: s for o, s in scores.items()}
    return RankedList.from_scores(by_page, retriever="bm25", top_n=top_n)
