"""Score fusion: min-max normalization, relative score fusion (RSF),
reciprocal rank fusion (RRF), hybrid text search, and alpha-weighted
multimodal fusion.

RSF min-max normalizes each input list to [0,1] and takes a weighted sum;
documents absent from a list contribute 0 for it. RRF ignores magnitudes:
score(d) = sum_i 1/(rrf_k + rank_i(d)) with 1-based ranks. Weighted variants
(hybrid 0.5/0.5, multimodal (1-alpha, alpha)) scale each list's term by its
weight. A list with weight exactly 0 is dropped entirely — it contributes
neither scores nor members — which makes the alpha endpoints reproduce the
surviving list's ranking exactly.
"""

from __future__ import annotations

from .errors import EmptyList, InvalidParams
from .ranking import RankedList

DEFAULT_RRF_K = 60


def minmax_normalize(ranked: RankedList) -> RankedList:
    """Max maps to 1, min to 0, linear in between; all-equal scores map to the
    neutral 0.5 (this includes single-element lists)."""
    if not ranked.hits:
        raise EmptyList("cannot normalize an empty list")
    values = [s for _, s in ranked.hits]
    lo, hi = min(values), max(values)
    if hi == lo:
        return RankedList([(pid, 0.5) for pid, _ in ranked.hits], ranked.retriever)
    span = hi - lo
    return RankedList(
        [(pid, (s - lo) / span) for pid, s in ranked.hits], ranked.retriever
    )


def _check_weights(lists: list[RankedList], weights: list[float]) -> list[float]:
    if len(weights) != len(lists):
        raise InvalidParams(
            f"weight/list count mismatch: {len(weights)} weights, {len(lists)} lists"
        )
    if any(w < 0 for w in weights):
        raise InvalidParams("weights must be non-negative")
    total = sum(weights)
    if total <= 0:
        raise InvalidParams("at least one weight must be positive")
    return [w / total for w in weights]


def _drop_zero_weight(
    lists: list[RankedList], weights: list[float]
) -> tuple[list[RankedList], list[float]]:
    kept = [(l, w) for l, w in zip(lists, weights) if w > 0]
    return [l for l, _ in kept], [w for _, w in kept]


def fusion_contributions(
    lists: list[RankedList],
    weights: list[float],
    strategy: str = "rsf",
    rrf_k: int = DEFAULT_RRF_K,
) -> dict[str, dict[str, float]]:
    """Per-page, per-input contribution terms; their sum is the fused score."""
    weights = _check_weights(lists, weights)
    lists, weights = _drop_zero_weight(lists, weights)
    if strategy not in ("rsf", "rrf"):
        raise InvalidParams(f"unknown fusion strategy {strategy!r}")
    contrib: dict[str, dict[str, float]] = {}
    for i, (ranked, w) in enumerate(zip(lists, weights)):
        tag = ranked.retriever or f"list{i}"
        if strategy == "rsf":
            for pid, s in minmax_normalize(ranked):
                contrib.setdefault(pid, {})[tag] = w * s
        else:
            if rrf_k < 1:
                raise InvalidParams("rrf_k must be positive")
            for rank, (pid, _) in enumerate(ranked, start=1):
                contrib.setdefault(pid, {})[tag] = w / (rrf_k + rank)
    return contrib


def _weighted_fuse(
    lists: list[RankedList],
    weights: list[float],
    strategy: str,
    rrf_k: int,
    retriever: str,
) -> RankedList:
    weights = _check_weights(lists, weights)
    lists, weights = _drop_zero_weight(lists, weights)
    if len(lists) == 1:
        return lists[0].retagged(retriever)
    fused: dict[str, float] = {}
    if strategy == "rsf":
        for ranked, w in zip(lists, weights):
            for pid, s in minmax_normalize(ranked):
                fused[pid] = fused.get(pid, 0.0) + w * s
    elif strategy == "rrf":
        if rrf_k < 1:
            raise InvalidParams("rrf_k must be positive")
        for ranked, w in zip(lists, weights):
            for rank, (pid, _) in enumerate(ranked, start=1):
                fused[pid] = fused.get(pid, 0.0) + w / (rrf_k + rank)
    else:
        raise InvalidParams(f"unknown fusion strategy {strategy!r}")
    return RankedList.from_scores(fused, retriever=retriever)


def rsf(lists: list[RankedList], weights: list[float]) -> RankedList:
    if len(lists) < 2:
        raise InvalidParams("rsf requires at least two lists")
    return _weighted_fuse(lists, weights, "rsf", DEFAULT_RRF_K, "rsf")


def rrf(lists: list[RankedList], rrf_k: int = DEFAULT_RRF_K) -> RankedList:
    """Plain reciprocal rank fusion: each list contributes 1/(rrf_k + rank)."""
    if len(lists) < 2:
        raise InvalidParams("rrf requires at least two lists")
    if rrf_k < 1:
        raise InvalidParams("rrf_k must be positive")
    fused: dict[str, float] = {}
    for ranked in lists:
        for rank, (pid, _) in enumerate(ranked, start=1):
            fused[pid] = fused.get(pid, 0.0) + 1.0 / (rrf_k + rank)
    return RankedList.from_scores(fused, retriever="rrf")


def hybrid_text(
    bm25_list: RankedList,
    dense_list: RankedList,
    strategy: str = "rsf",
    rrf_k: int = DEFAULT_RRF_K,
) -> RankedList:
    """Equal-weight fusion of the sparse and dense text retrievers."""
    return _weighted_fuse(
        [bm25_list, dense_list],
        [0.5, 0.5],
        strategy,
        rrf_k,
        retriever=f"hybrid_text[{strategy}]",
    )


def multimodal(
    hybrid_text_list: RankedList,
    image_list: RankedList,
    alpha: float,
    strategy: str = "rsf",
    rrf_k: int = DEFAULT_RRF_K,
) -> RankedList:
    """(1-alpha) on the hybrid text list, alpha on the image list. alpha=0 and
    alpha=1 reproduce the respective input rankings exactly."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParams(f"alpha out of range: {alpha}")
    return _weighted_fuse(
        [hybrid_text_list, image_list],
        [1.0 - alpha, alpha],
        strategy,
        rrf_k,
        retriever=f"multimodal[{strategy},alpha={alpha:g}]",
    )


def candidate_pool_size(k_eval: int) -> int:
    """Depth each retriever contributes to fusion: max(100, 5 x K_eval)."""
    return max(100, 5 * k_eval)
