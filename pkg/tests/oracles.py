"""Independent reference implementations used as test oracles.

Everything here is deliberately naive: plain loops, textbook formulas, no
reuse of the package's optimized kernels. Slow is fine; independent is the
point.
"""

from __future__ import annotations

import math

import numpy as np


def okapi_bm25_scores(
    docs: list[list[str]], query_terms: list[str], k1: float = 1.2, b: float = 0.75
) -> list[float]:
    """Okapi BM25 with idf = ln(1 + (N - df + 0.5)/(df + 0.5)), straight from
    the formula, one doc at a time. Query terms contribute per occurrence."""
    n = len(docs)
    lengths = [len(d) for d in docs]
    avgdl = sum(lengths) / n if n else 0.0
    scores = []
    for doc, dl in zip(docs, lengths):
        score = 0.0
        for term in query_terms:
            tf = sum(1 for t in doc if t == term)
            if tf == 0:
                continue
            df = sum(1 for other in docs if term in other)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            norm = (1.0 - b) + b * (dl / avgdl) if avgdl > 0 else 1.0
            score += idf * tf * (k1 + 1.0) / (tf + k1 * norm)
        scores.append(score)
    return scores


def naive_maxsim(query_vectors: np.ndarray, doc_vectors: np.ndarray) -> float:
    """Double loop: for each query vector, scan every doc vector."""
    total = 0.0
    for q in np.asarray(query_vectors, dtype=np.float64):
        best = -math.inf
        for d in np.asarray(doc_vectors, dtype=np.float64):
            s = float(np.dot(q, d))
            if s > best:
                best = s
        total += best
    return total


def naive_minmax(scores: list[float]) -> list[float]:
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [0.5] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def naive_weighted_fuse(
    lists: list[list[tuple[str, float]]],
    weights: list[float],
    strategy: str,
    rrf_k: int = 60,
) -> dict[str, float]:
    """Reference RSF/RRF recomputation over (page_id, score) lists. Weights
    are normalized to sum 1; absent pages contribute nothing."""
    total_w = sum(weights)
    weights = [w / total_w for w in weights]
    fused: dict[str, float] = {}
    for pairs, w in zip(lists, weights):
        if w == 0.0:
            continue
        if strategy == "rsf":
            normed = naive_minmax([s for _, s in pairs])
            for (pid, _), ns in zip(pairs, normed):
                fused[pid] = fused.get(pid, 0.0) + w * ns
        else:
            for rank, (pid, _) in enumerate(pairs, start=1):
                fused[pid] = fused.get(pid, 0.0) + w / (rrf_k + rank)
    return fused


def ranking_of(score_map: dict[str, float]) -> list[str]:
    return [pid for pid, _ in sorted(score_map.items(), key=lambda kv: (-kv[1], kv[0]))]
