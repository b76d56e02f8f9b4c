"""Fixed-dimensional encoding (FDE) of multi-vector sets, plus the two-stage
retrieval path: FDE dot-product candidate generation, exact MaxSim rescoring.

Construction, per repetition: every vector lands in one of 2^k_sim SimHash
buckets (bit i = 1 iff v . h_i > 0 against seeded Gaussian hyperplanes, bits
packed most-significant-first). Document FDEs average the vectors in each
bucket; empty buckets are filled with the single nearest document vector by
Hamming distance between bit codes (ties to the lowest vector index). Query
FDEs sum the vectors in each bucket and leave empty buckets at zero — absent
query mass must contribute nothing, and repeated query tokens must count
twice. Each bucket's sub-vector is then projected d -> d_proj by a seeded
random sign matrix scaled by 1/sqrt(d_proj); buckets are concatenated, then
repetitions. Final length = 2^k_sim * d_proj * repetitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import GraphIndex, SearchParams, graph_search
from .errors import DimMismatch, EmptySet, IncompatibleStore, InvalidParams
from .maxsim import MultiVectorStore
from .ranking import RankedList, canonical_order


@dataclass(frozen=True)
class FdeParams:
    k_sim: int = 4
    d_proj: int = 16
    repetitions: int = 10
    seed: int = 0
    identity_projection: bool = False

    def __post_init__(self):
        if self.k_sim < 1 or self.d_proj < 1 or self.repetitions < 1:
            raise InvalidParams("k_sim, d_proj, repetitions must be positive")

    def to_json(self) -> dict:
        return {
            "k_sim": self.k_sim,
            "d_proj": self.d_proj,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "identity_projection": self.identity_projection,
        }


def fde_dim(params: FdeParams) -> int:
    return (2**params.k_sim) * params.d_proj * params.repetitions


def simhash_bucket(vector: np.ndarray, hyperplanes: np.ndarray) -> int:
    """Bucket index for one vector against one repetition's (k_sim, d) planes."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    h = np.asarray(hyperplanes, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != v.shape[0]:
        raise DimMismatch(f"hyperplanes {h.shape} incompatible with vector dim {v.shape[0]}")
    bits = (h @ v) > 0
    k = h.shape[0]
    return int(sum(int(b) << (k - 1 - i) for i, b in enumerate(bits)))


class FdeEncoder:
    """Shared hyperplanes and projections for one index; pure function of
    (dim, params), so document and query encodings always agree."""

    def __init__(self, dim: int, params: FdeParams):
        if params.identity_projection and params.d_proj != dim:
            raise InvalidParams(
                f"identity projection requires d_proj == dim ({params.d_proj} != {dim})"
            )
        self.dim = dim
        self.params = params
        self.buckets = 2**params.k_sim
        rng = np.random.default_rng(np.random.SeedSequence([_nonneg(params.seed), 0]))
        self.hyperplanes = rng.normal(
            size=(params.repetitions, params.k_sim, dim)
        )  # (reps, k_sim, d)
        # MSB-first bit weights
        self._bit_weights = 1 << np.arange(params.k_sim - 1, -1, -1)
        self._popcount = np.array([bin(i).count("1") for i in range(self.buckets)])
        if params.identity_projection:
            self.projections = None
        else:
            mats = np.empty((params.repetitions, self.buckets, dim, params.d_proj))
            for rep in range(params.repetitions):
                for b in range(self.buckets):
                    r = np.random.default_rng(
                        np.random.SeedSequence([_nonneg(params.seed), 1, rep, b])
                    )
                    signs = r.integers(0, 2, size=(dim, params.d_proj)) * 2 - 1
                    mats[rep, b] = signs / np.sqrt(params.d_proj)
            self.projections = mats

    def bucket_codes(self, vectors: np.ndarray, rep: int) -> np.ndarray:
        """SimHash bucket index for each row of vectors under repetition rep."""
        bits = (vectors @ self.hyperplanes[rep].T) > 0  # (n, k_sim)
        return bits @ self._bit_weights

    def _project(self, rep: int, bucket: int, sub: np.ndarray) -> np.ndarray:
        if self.projections is None:
            return sub
        return sub @ self.projections[rep, bucket]

    def _validate(self, vectors: np.ndarray) -> np.ndarray:
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] == 0:
            raise EmptySet("vector set must be a non-empty n x d array")
        if v.shape[1] != self.dim:
            raise DimMismatch(f"vector dim {v.shape[1]}, encoder dim {self.dim}")
        return v

    def encode_doc(self, doc_vectors: np.ndarray) -> np.ndarray:
        v = self._validate(doc_vectors)
        out = []
        for rep in range(self.params.repetitions):
            codes = self.bucket_codes(v, rep)
            for b in range(self.buckets):
                members = np.flatnonzero(codes == b)
                if members.size:
                    sub = v[members].mean(axis=0)
                else:
                    # fill from the nearest vector by Hamming distance on codes
                    nearest = int(np.argmin(self._popcount[codes ^ b]))
                    sub = v[nearest]
                out.append(self._project(rep, b, sub))
        return np.concatenate(out).astype(np.float32)

    def encode_query(self, query_vectors: np.ndarray) -> np.ndarray:
        v = self._validate(query_vectors)
        d_out = self.dim if self.projections is None else self.params.d_proj
        out = np.zeros((self.params.repetitions, self.buckets, d_out))
        for rep in range(self.params.repetitions):
            codes = self.bucket_codes(v, rep)
            for b in np.unique(codes):
                sub = v[codes == b].sum(axis=0)
                out[rep, int(b)] = self._project(rep, int(b), sub)
        return out.reshape(-1).astype(np.float32)


def _nonneg(seed: int) -> int:
    # SeedSequence entropy must be non-negative; fold sign into a distinct value
    return seed if seed >= 0 else (1 << 63) + (-seed)


def _encoder_for(vectors, params: FdeParams) -> tuple[np.ndarray, FdeEncoder]:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptySet("vector set must be a non-empty n x d array")
    return arr, FdeEncoder(arr.shape[1], params)


def encode_doc_fde(doc_vectors, params: FdeParams = FdeParams()) -> np.ndarray:
    """One-shot document encoding; the encoder is a pure function of
    (dim, params), so repeated calls with one seed always agree."""
    arr, enc = _encoder_for(doc_vectors, params)
    return enc.encode_doc(arr)


def encode_query_fde(query_vectors, params: FdeParams = FdeParams()) -> np.ndarray:
    arr, enc = _encoder_for(query_vectors, params)
    return enc.encode_query(arr)


def memory_estimate(
    page_count: int, avg_vectors_per_page: float, dim: int, params: FdeParams
) -> dict:
    """Raw multi-vector bytes vs FDE bytes at 4 bytes per value."""
    if page_count <= 0 or avg_vectors_per_page <= 0 or dim <= 0:
        raise InvalidParams("memory_estimate inputs must be positive")
    raw = page_count * avg_vectors_per_page * dim * 4
    fde = page_count * fde_dim(params) * 4
    return {
        "raw_bytes": int(round(raw)),
        "fde_bytes": int(fde),
        "ratio": raw / fde,
    }


class FdeIndex:
    """Per-page document FDEs in sorted page_id order."""

    def __init__(self, page_ids: list[str], doc_fdes: np.ndarray, encoder: FdeEncoder):
        self.page_ids = page_ids
        self.doc_fdes = doc_fdes.astype(np.float32)
        self.encoder = encoder
        self.params = encoder.params

    def __len__(self) -> int:
        return len(self.page_ids)

    def stage1_scores(self, query_vectors: np.ndarray) -> np.ndarray:
        qf = self.encoder.encode_query(query_vectors).astype(np.float64)
        return self.doc_fdes.astype(np.float64) @ qf


def build_fde_index(store: MultiVectorStore, params: FdeParams = FdeParams()) -> FdeIndex:
    encoder = FdeEncoder(store.dim, params)
    fdes = np.stack([encoder.encode_doc(doc) for _, doc in store.iter_docs()])
    return FdeIndex(store.page_ids, fdes, encoder)


def two_stage_search(
    fde_index: FdeIndex,
    multivector_store: MultiVectorStore,
    query_vectors: np.ndarray,
    search_params: SearchParams,
    graph: GraphIndex | None = None,
) -> RankedList:
    """Stage 1: top-ef pages by FDE dot product (exact scan by default, graph
    over the FDE matrix when supplied). Stage 2: exact MaxSim over the
    candidates; final top-k by MaxSim with page_id tie-break."""
    if fde_index.page_ids != multivector_store.page_ids:
        raise IncompatibleStore("FDE index and multi-vector store cover different pages")
    n = len(fde_index)
    if n == 0:
        raise EmptySet("empty index")
    ef = min(search_params.ef, n)
    k = min(search_params.k, n)

    if graph is not None:
        qf = fde_index.encoder.encode_query(query_vectors)
        stage1 = graph_search(graph, qf, SearchParams(ef=ef, k=ef))
        candidates = stage1.page_ids()
    else:
        scores = fde_index.stage1_scores(query_vectors)
        pairs = canonical_order(zip(fde_index.page_ids, (float(s) for s in scores)))
        candidates = [pid for pid, _ in pairs[:ef]]

    rescored = multivector_store.rescore(query_vectors, candidates)
    return RankedList.from_scores(rescored, retriever="muvera", top_n=k)
