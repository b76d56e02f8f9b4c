"""Multi-vector storage and exact MaxSim scoring.

MaxSim(Q, D) = sum over query vectors of the maximum dot product against any
document vector. Similarity is the raw dot product — late-interaction models
normalize their token embeddings upstream, so the kernel never renormalizes.

Storage is 32-bit floats; arithmetic runs in float64 so the blocked
full-corpus path and the naive per-pair path agree far inside the 1e-6
tolerance regardless of summation order.
"""

from __future__ import annotations

import numpy as np

from .corpus import EmbeddingChannel
from .errors import DimMismatch, EmptySet, InvalidParams
from .ranking import RankedList


def _validate_pair(query_vectors: np.ndarray, doc_vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(query_vectors, dtype=np.float64)
    d = np.asarray(doc_vectors, dtype=np.float64)
    if q.ndim != 2 or d.ndim != 2:
        raise DimMismatch("expected 2-D arrays (vectors x dim)")
    if q.shape[0] == 0 or d.shape[0] == 0:
        raise EmptySet("query and doc vector sets must be non-empty")
    if q.shape[1] != d.shape[1]:
        raise DimMismatch(f"query dim {q.shape[1]} vs doc dim {d.shape[1]}")
    return q, d


def maxsim(query_vectors: np.ndarray, doc_vectors: np.ndarray) -> float:
    q, d = _validate_pair(query_vectors, doc_vectors)
    sim = q @ d.T
    return float(sim.max(axis=1).sum())


def maxsim_heatmap(query_vectors: np.ndarray, doc_vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full m x n dot-product matrix plus per-row argmax. Row maxima sum to the
    maxsim value (within float tolerance)."""
    q, d = _validate_pair(query_vectors, doc_vectors)
    sim = q @ d.T
    return sim, sim.argmax(axis=1)


class MultiVectorStore:
    """All pages of a multi-vector channel concatenated into one (T, d) block
    with per-page offsets, so one matmul per query covers the whole corpus."""

    def __init__(self, channel: EmbeddingChannel):
        if channel.kind != "multi":
            raise InvalidParams(
                f"channel {channel.channel_id!r} is dense; multi-vector channel required"
            )
        self.channel_id = channel.channel_id
        self.page_ids = channel.sorted_ids()
        self.dim = channel.dim
        counts = [channel.payloads[p].shape[0] for p in self.page_ids]
        self.starts = np.zeros(len(counts), dtype=np.int64)
        if counts:
            np.cumsum(counts[:-1], out=self.starts[1:])
        self.data = (
            np.concatenate([channel.payloads[p] for p in self.page_ids], axis=0)
            .astype(np.float32)
            if self.page_ids
            else np.zeros((0, channel.dim), dtype=np.float32)
        )
        self._ends = self.starts + np.array(counts, dtype=np.int64)
        self._index = {p: i for i, p in enumerate(self.page_ids)}

    def __len__(self) -> int:
        return len(self.page_ids)

    def doc(self, page_id: str) -> np.ndarray:
        i = self._index[page_id]
        return self.data[self.starts[i] : self._ends[i]]

    def iter_docs(self):
        for i, pid in enumerate(self.page_ids):
            yield pid, self.data[self.starts[i] : self._ends[i]]

    def all_scores(self, query_vectors: np.ndarray) -> np.ndarray:
        """MaxSim against every page at once via segmented row maxima."""
        q = np.asarray(query_vectors, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] == 0:
            raise EmptySet("query vector set must be non-empty")
        if q.shape[1] != self.dim:
            raise DimMismatch(f"query dim {q.shape[1]} vs store dim {self.dim}")
        if not self.page_ids:
            return np.zeros(0)
        sim = q @ self.data.T.astype(np.float64)  # (m, T)
        seg_max = np.maximum.reduceat(sim, self.starts, axis=1)  # (m, pages)
        return seg_max.sum(axis=0)

    def rescore(self, query_vectors: np.ndarray, page_ids: list[str]) -> dict[str, float]:
        q = np.asarray(query_vectors, dtype=np.float64)
        out: dict[str, float] = {}
        for pid in page_ids:
            d = self.doc(pid).astype(np.float64)
            out[pid] = float((q @ d.T).max(axis=1).sum())
        return out


def exact_maxsim_search(store: MultiVectorStore, query_vectors: np.ndarray, k: int) -> RankedList:
    """True top-k by MaxSim over the whole store; ties by ascending page_id."""
    scores = store.all_scores(query_vectors)
    by_page = {pid: float(s) for pid, s in zip(store.page_ids, scores)}
    return RankedList.from_scores(by_page, retriever="maxsim", top_n=k)
