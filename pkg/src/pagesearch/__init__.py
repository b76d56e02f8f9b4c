"""pagesearch: a multi-retriever page search engine and benchmark harness.

Retrieval paths: BM25 over page text, dense single-vector search (exact scan
or a graph index with a query-time ef knob), exact late-interaction MaxSim
over multi-vector embeddings, and fixed-dimensional encoding with two-stage
rescoring. Fusion: min-max relative score fusion and reciprocal rank fusion,
equal-weight hybrid text search, and alpha-weighted multimodal search.
Evaluation: Recall@K, complementarity partitions, alpha sweeps, and an
offline-testable RAG harness with majority-vote judging.

Everything runs from precomputed embeddings in line-delimited JSON files; no
model inference happens in this package.
"""

__version__ = "0.1.0"

from .bm25 import Bm25Params, bm25_search, build_index, tokenize
from .corpus import (
    CorpusHandle,
    EmbeddingChannel,
    PageRecord,
    QueryRecord,
    QuerySet,
    attach_embeddings,
    ingest_corpus,
    ingest_queries,
    load,
    persist,
)
from .dense import (
    DenseIndex,
    GraphIndex,
    GraphIndexParams,
    SearchParams,
    build_exact,
    build_graph,
    exact_search,
    graph_search,
)
from .engine import Engine, SearchOptions
from .fde import (
    FdeEncoder,
    FdeIndex,
    FdeParams,
    build_fde_index,
    encode_doc_fde,
    encode_query_fde,
    fde_dim,
    memory_estimate,
    simhash_bucket,
    two_stage_search,
)
from .fusion import hybrid_text, minmax_normalize, multimodal, rrf, rsf
from .maxsim import MultiVectorStore, exact_maxsim_search, maxsim, maxsim_heatmap
from .metrics import (
    ComplementarityReport,
    RecallReport,
    RetrievalRun,
    alpha_sweep,
    emit_report,
    evaluate,
    exclusive_successes,
    recall_at_k,
)
from .rag import (
    JudgeClient,
    QaResult,
    RagConfig,
    ReaderClient,
    StubJudge,
    StubReader,
    alignment_score,
    assemble_context,
    judge_majority,
    qa_report,
    run_rag,
)
from .ranking import RankedList
