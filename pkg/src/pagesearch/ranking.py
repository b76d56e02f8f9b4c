"""RankedList: the ordered (page_id, score) currency passed between retrievers,
fusion, and metrics.

Canonical order everywhere in the engine: descending score, ties broken by
ascending page_id. All constructors here enforce it so downstream code never
re-sorts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping


@dataclass
class RankedList:
    hits: list[tuple[str, float]]
    retriever: str = ""

    # rank lookups are 1-based; cache built lazily
    _ranks: dict[str, int] | None = field(default=None, repr=False, compare=False)

    @staticmethod
    def from_scores(
        scores: Mapping[str, float], retriever: str = "", top_n: int | None = None
    ) -> "RankedList":
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        if top_n is not None:
            ordered = ordered[:top_n]
        return RankedList([(pid, float(s)) for pid, s in ordered], retriever)

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    def page_ids(self) -> list[str]:
        return [pid for pid, _ in self.hits]

    def rank_of(self, page_id: str) -> int | None:
        """1-based rank of page_id, or None if absent."""
        if self._ranks is None:
            self._ranks = {pid: i + 1 for i, (pid, _) in enumerate(self.hits)}
        return self._ranks.get(page_id)

    def score_of(self, page_id: str) -> float | None:
        for pid, s in self.hits:
            if pid == page_id:
                return s
        return None

    def top(self, n: int) -> "RankedList":
        return RankedList(self.hits[:n], self.retriever)

    def retagged(self, retriever: str) -> "RankedList":
        return RankedList(list(self.hits), retriever)

    def to_json(self) -> list[dict]:
        return [
            {"rank": i + 1, "page_id": pid, "score": s}
            for i, (pid, s) in enumerate(self.hits)
        ]


def ranking_equal(a: RankedList, b: RankedList) -> bool:
    """Same page_ids in the same order; scores ignored."""
    return a.page_ids() == b.page_ids()


def canonical_order(pairs: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    return sorted(pairs, key=lambda kv: (-kv[1], kv[0]))
