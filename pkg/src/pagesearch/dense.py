"""Single-vector similarity search: an exact scan oracle and a layered
navigable-small-world graph index with a query-time ``ef`` knob.

The exact scan is the default backend at desk scale; the graph exists to expose
the ef/recall tradeoff honestly. Graph search at layer 0 is deterministic
best-first expansion with a budget of ``ef`` node expansions; the candidate
pool is every node whose similarity was computed. Because the expansion order
does not depend on ef, the visited set at a larger ef is a superset of the
visited set at a smaller ef, which makes recall against the exact oracle
non-decreasing in ef. ef >= corpus size short-circuits to an exhaustive scan.

Scores are similarities (higher is better): raw dot product, or cosine as dot
over unit-normalized vectors.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingChannel
from .errors import DimMismatch, InvalidParams
from .ranking import RankedList


@dataclass(frozen=True)
class GraphIndexParams:
    M: int = 16
    ef_construction: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise InvalidParams("M must be >= 2")
        if self.ef_construction < 1:
            raise InvalidParams("ef_construction must be >= 1")


@dataclass(frozen=True)
class SearchParams:
    ef: int
    k: int

    def __post_init__(self):
        if self.k < 1 or self.ef < 1:
            raise InvalidParams("ef and k must be positive")
        if self.ef < self.k:
            raise InvalidParams(f"ef ({self.ef}) must be >= k ({self.k})")


def _as_matrix(channel: EmbeddingChannel) -> tuple[list[str], np.ndarray]:
    if channel.kind != "dense":
        raise InvalidParams(
            f"channel {channel.channel_id!r} is multi-vector; dense channel required"
        )
    ids = channel.sorted_ids()
    matrix = np.stack([channel.payloads[i] for i in ids]).astype(np.float32)
    return ids, matrix


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return np.where(norms > 0, matrix / np.maximum(norms, 1e-30), matrix)


class DenseIndex:
    def __init__(self, page_ids: list[str], matrix: np.ndarray, metric: str = "dot"):
        if metric not in ("dot", "cosine"):
            raise InvalidParams(f"unknown metric {metric!r}")
        self.page_ids = page_ids
        self.metric = metric
        m = matrix.astype(np.float32)
        self.matrix = _unit_rows(m) if metric == "cosine" else m
        self.dim = int(matrix.shape[1])

    def _prep_query(self, query_vec: np.ndarray) -> np.ndarray:
        q = np.asarray(query_vec, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimMismatch(f"query dim {q.shape[0]}, index dim {self.dim}")
        if self.metric == "cosine":
            n = np.linalg.norm(q)
            if n > 0:
                q = q / n
        return q

    def scores(self, query_vec: np.ndarray) -> np.ndarray:
        q = self._prep_query(query_vec)
        return self.matrix.astype(np.float64) @ q


def build_exact(channel: EmbeddingChannel, metric: str = "dot") -> DenseIndex:
    ids, matrix = _as_matrix(channel)
    return DenseIndex(ids, matrix, metric)


def exact_search(index: DenseIndex, query_vec: np.ndarray, k: int) -> RankedList:
    """True top-k by metric; ties broken by ascending page_id. k beyond the
    corpus size returns the full ranking."""
    scores = index.scores(query_vec)
    by_page = {pid: float(s) for pid, s in zip(index.page_ids, scores)}
    return RankedList.from_scores(by_page, retriever=f"dense:{index.metric}", top_n=k)


class GraphIndex:
    """Layered graph over a dense channel. Layer 0 allows 2M neighbors, upper
    layers M, per the usual navigable-small-world construction."""

    def __init__(
        self,
        page_ids: list[str],
        matrix: np.ndarray,
        params: GraphIndexParams,
        metric: str = "dot",
    ):
        self.page_ids = page_ids
        self.params = params
        self.metric = metric
        m = matrix.astype(np.float32)
        self.matrix = _unit_rows(m) if metric == "cosine" else m
        self._m64 = self.matrix.astype(np.float64)
        self.dim = int(matrix.shape[1])
        self.levels: list[int] = []
        self.layers: list[list[list[int]]] = []  # layers[l][node] -> neighbor ordinals
        self.entry_point = -1
        self.max_level = -1
        self._build()

    # -- construction -------------------------------------------------------

    def _sim(self, a: int, vec: np.ndarray) -> float:
        return float(self._m64[a] @ vec)

    def _draw_level(self, rng: np.random.Generator) -> int:
        ml = 1.0 / math.log(self.params.M)
        u = float(rng.uniform(1e-12, 1.0))
        return int(-math.log(u) * ml)

    def _max_neighbors(self, layer: int) -> int:
        return self.params.M * 2 if layer == 0 else self.params.M

    def _search_layer(self, vec: np.ndarray, entry: int, ef: int, layer: int) -> list[tuple[float, int]]:
        """Beam search within one layer; returns up to ef (sim, ordinal) pairs,
        deterministic via ordinal tie-breaking in both heaps."""
        sim0 = self._sim(entry, vec)
        visited = {entry}
        candidates = [(-sim0, entry)]  # max-heap on similarity
        results = [(sim0, entry)]  # min-heap, worst first
        while candidates:
            neg, node = heapq.heappop(candidates)
            if -neg < results[0][0] and len(results) >= ef:
                break
            fresh = [nb for nb in self.layers[layer][node] if nb not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            sims = self._m64[fresh] @ vec
            for nb, s in zip(fresh, sims.tolist()):
                if len(results) < ef or s > results[0][0]:
                    heapq.heappush(candidates, (-s, nb))
                    heapq.heappush(results, (s, nb))
                    if len(results) > ef:
                        heapq.heappop(results)
        return sorted(results, key=lambda t: (-t[0], t[1]))

    def _build(self) -> None:
        rng = np.random.default_rng(self.params.seed)
        n = self.matrix.shape[0]
        self.levels = [self._draw_level(rng) for _ in range(n)]
        top_cap = max(self.levels) if n else 0
        self.layers = [[[] for _ in range(n)] for _ in range(top_cap + 1)]
        for node in range(n):
            self._insert(node)

    def _insert(self, node: int) -> None:
        level = self.levels[node]
        vec = self.matrix[node].astype(np.float64)
        if self.entry_point < 0:
            self.entry_point = node
            self.max_level = level
            return
        cur = self.entry_point
        for layer in range(self.max_level, level, -1):
            cur = self._greedy_step(vec, cur, layer)
        for layer in range(min(level, self.max_level), -1, -1):
            found = self._search_layer(vec, cur, self.params.ef_construction, layer)
            cap = self._max_neighbors(layer)
            chosen = [o for _, o in found[:cap]]
            self.layers[layer][node] = chosen
            for nb in chosen:
                links = self.layers[layer][nb]
                links.append(node)
                if len(links) > cap:
                    # keep the cap most similar links, ties to lower ordinal
                    sims = self._m64[links] @ self._m64[nb]
                    order = sorted(zip(links, sims.tolist()), key=lambda t: (-t[1], t[0]))
                    self.layers[layer][nb] = [o for o, _ in order[:cap]]
            cur = found[0][1]
        if level > self.max_level:
            self.max_level = level
            self.entry_point = node

    def _greedy_step(self, vec: np.ndarray, start: int, layer: int) -> int:
        cur = start
        cur_sim = self._sim(cur, vec)
        while True:
            nbrs = self.layers[layer][cur]
            if not nbrs:
                return cur
            sims = self._m64[nbrs] @ vec
            # best neighbor under (sim desc, ordinal asc)
            nb, s = min(zip(nbrs, sims.tolist()), key=lambda t: (-t[1], t[0]))
            if s > cur_sim or (s == cur_sim and nb < cur):
                cur, cur_sim = nb, s
            else:
                return cur

    # -- query --------------------------------------------------------------

    def _prep_query(self, query_vec: np.ndarray) -> np.ndarray:
        q = np.asarray(query_vec, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimMismatch(f"query dim {q.shape[0]}, index dim {self.dim}")
        if self.metric == "cosine":
            n = np.linalg.norm(q)
            if n > 0:
                q = q / n
        return q

    def candidate_pool(self, query_vec: np.ndarray, ef: int) -> dict[int, float]:
        """Ordinal -> similarity for every node scored during the search."""
        q = self._prep_query(query_vec)
        n = self.matrix.shape[0]
        if n == 0:
            return {}
        if ef >= n:
            sims = self._m64 @ q
            return {i: float(s) for i, s in enumerate(sims)}
        cur = self.entry_point
        for layer in range(self.max_level, 0, -1):
            cur = self._greedy_step(q, cur, layer)
        pool = {cur: self._sim(cur, q)}
        frontier = [(-pool[cur], cur)]
        visited = {cur}
        expansions = 0
        while frontier and expansions < ef:
            _, node = heapq.heappop(frontier)
            expansions += 1
            fresh = [nb for nb in self.layers[0][node] if nb not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            sims = self._m64[fresh] @ q
            for nb, s in zip(fresh, sims.tolist()):
                pool[nb] = s
                heapq.heappush(frontier, (-s, nb))
        return pool

    def to_payload(self) -> dict:
        return {
            "params": {
                "M": self.params.M,
                "ef_construction": self.params.ef_construction,
                "seed": self.params.seed,
            },
            "metric": self.metric,
            "levels": self.levels,
            "entry_point": self.entry_point,
            "max_level": self.max_level,
            "layers": self.layers,
        }

    @classmethod
    def from_payload(cls, payload: dict, page_ids: list[str], matrix: np.ndarray) -> "GraphIndex":
        obj = cls.__new__(cls)
        obj.page_ids = page_ids
        obj.params = GraphIndexParams(**payload["params"])
        obj.metric = payload["metric"]
        m = matrix.astype(np.float32)
        obj.matrix = _unit_rows(m) if obj.metric == "cosine" else m
        obj._m64 = obj.matrix.astype(np.float64)
        obj.dim = int(matrix.shape[1])
        obj.levels = [int(x) for x in payload["levels"]]
        obj.layers = [[list(map(int, nbrs)) for nbrs in layer] for layer in payload["layers"]]
        obj.entry_point = int(payload["entry_point"])
        obj.max_level = int(payload["max_level"])
        return obj


def build_graph(
    channel: EmbeddingChannel, params: GraphIndexParams = GraphIndexParams(), metric: str = "dot"
) -> GraphIndex:
    ids, matrix = _as_matrix(channel)
    return GraphIndex(ids, matrix, params, metric)


def graph_search(index: GraphIndex, query_vec: np.ndarray, search_params: SearchParams) -> RankedList:
    pool = index.candidate_pool(query_vec, search_params.ef)
    by_page = {index.page_ids[o]: s for o, s in pool.items()}
    return RankedList.from_scores(
        by_page, retriever=f"graph:{index.metric}", top_n=search_params.k
    )
