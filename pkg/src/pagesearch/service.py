"""HTTP service wrapping the engine.

The service fronts on-disk stores: requests carry a store_dir path, handles
are cached in-process, and every search/benchmark/rag endpoint is a thin
typed shim over the same Engine the CLI uses. This is a localhost operator
tool — file paths in request bodies are deliberate.

Error mapping: usage errors -> 400, data errors -> 422, external service
errors -> 502; the body carries {"error": <stable name>, "detail": <message>}
so clients can recover the engine error class.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .dense import GraphIndexParams
from .engine import Engine, SearchOptions
from .errors import DATA, SERVICE, USAGE, InvalidParams, PageSearchError
from .fde import FdeParams
from .metrics import DEFAULT_ALPHA_GRID, DEFAULT_KS, DEFAULT_STRATEGIES, emit_report
from .rag import RagConfig

_STATUS = {USAGE: 400, DATA: 422, SERVICE: 502}


class EmbeddingSpec(BaseModel):
    path: str
    channel_id: str


class IngestRequest(BaseModel):
    store_dir: str
    corpus_path: str
    queries_path: str | None = None
    embeddings: list[EmbeddingSpec] = Field(default_factory=list)
    query_embeddings: list[EmbeddingSpec] = Field(default_factory=list)
    normalize: list[str] = Field(default_factory=list)


class FdeParamsModel(BaseModel):
    k_sim: int = 4
    d_proj: int = 16
    repetitions: int = 10
    seed: int = 0
    identity_projection: bool = False

    def to_params(self) -> FdeParams:
        return FdeParams(**self.model_dump())


class GraphParamsModel(BaseModel):
    M: int = 16
    ef_construction: int = 128
    seed: int = 0

    def to_params(self) -> GraphIndexParams:
        return GraphIndexParams(**self.model_dump())


class IndexRequest(BaseModel):
    store_dir: str
    kind: str  # bm25 | dense | graph | fde
    channel: str | None = None
    metric: str | None = None
    fde: FdeParamsModel = Field(default_factory=FdeParamsModel)
    graph: GraphParamsModel = Field(default_factory=GraphParamsModel)


class SearchRequest(BaseModel):
    store_dir: str
    retriever: str = "bm25"
    query_text: str | None = None
    query_id: str | None = None
    k: int = 20
    ef: int = 160
    channel: str | None = None
    metric: str | None = None
    strategy: str = "rsf"
    alpha: float = 0.5
    rrf_k: int = 60
    pool: int | None = None
    image_retriever: str = "maxsim"
    fde: FdeParamsModel = Field(default_factory=FdeParamsModel)
    use_graph: bool = False
    graph: GraphParamsModel = Field(default_factory=GraphParamsModel)
    explain: bool = False

    def to_options(self) -> SearchOptions:
        return SearchOptions(
            retriever=self.retriever,
            k=self.k,
            ef=self.ef,
            channel=self.channel,
            metric=self.metric,
            strategy=self.strategy,
            alpha=self.alpha,
            rrf_k=self.rrf_k,
            pool=self.pool,
            image_retriever=self.image_retriever,
            fde=self.fde.to_params(),
            graph=self.use_graph,
            graph_params=self.graph.to_params(),
            explain=self.explain,
        )


class BenchmarkRequest(BaseModel):
    store_dir: str
    out_dir: str
    retrievers: list[str] | None = None
    ks: list[int] = Field(default_factory=lambda: list(DEFAULT_KS))
    alpha_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    strategies: list[str] = Field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    ef: int = 160
    alpha: float = 0.5
    strategy: str = "rsf"
    rrf_k: int = 60
    pool: int | None = None
    image_retriever: str = "maxsim"
    fde: FdeParamsModel = Field(default_factory=FdeParamsModel)
    use_graph: bool = False
    doc_level: bool = False
    complementarity_k: int = 1
    timestamps: bool = False


class RagRequest(BaseModel):
    store_dir: str
    out_path: str | None = None
    modality: str = "text"
    k: int = 1
    mode: str = "standard"
    judge_votes: int = 3
    strict_hard_negative: bool = False
    jobs: int = 4
    image_root: str | None = None
    reader: str = "stub"  # stub | http
    judge: str = "stub"  # stub | http
    retriever: str | None = None
    ef: int = 160
    strategy: str = "rsf"
    alpha: float = 0.5
    channel: str | None = None


class ReportRequest(BaseModel):
    path: str | None = None
    reports: list[dict] | None = None
    format: str = "markdown"


def create_app(engine: Engine | None = None) -> FastAPI:
    app = FastAPI(title="pagesearch", version=__version__)
    eng = engine or Engine()

    @app.exception_handler(PageSearchError)
    async def _engine_error(request: Request, exc: PageSearchError):
        return JSONResponse(
            status_code=_STATUS.get(exc.exit_code, 422),
            content={"error": exc.name, "detail": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/manifest")
    def manifest(store_dir: str) -> dict:
        return eng.load_handle(store_dir).manifest()

    @app.post("/ingest")
    def ingest(req: IngestRequest) -> dict:
        return eng.ingest(
            req.store_dir,
            req.corpus_path,
            queries_path=req.queries_path,
            embeddings=[e.model_dump() for e in req.embeddings],
            query_embeddings=[e.model_dump() for e in req.query_embeddings],
            normalize=req.normalize,
        )

    @app.post("/index")
    def index(req: IndexRequest) -> dict:
        return eng.build_index(
            req.store_dir,
            req.kind,
            channel=req.channel,
            metric=req.metric,
            fde_params=req.fde.to_params(),
            graph_params=req.graph.to_params(),
        )

    @app.post("/search")
    def search(req: SearchRequest) -> dict:
        return eng.search(
            req.store_dir,
            req.to_options(),
            query_id=req.query_id,
            query_text=req.query_text,
        )

    @app.post("/benchmark")
    def benchmark(req: BenchmarkRequest) -> dict:
        meta = None
        if req.timestamps:
            meta = {"generated_at": dt.datetime.now(dt.timezone.utc).isoformat()}
        opts = SearchOptions(
            ef=req.ef,
            alpha=req.alpha,
            strategy=req.strategy,
            rrf_k=req.rrf_k,
            pool=req.pool,
            image_retriever=req.image_retriever,
            fde=req.fde.to_params(),
            graph=req.use_graph,
        )
        return eng.benchmark(
            req.store_dir,
            req.out_dir,
            retrievers=req.retrievers,
            ks=tuple(req.ks),
            alpha_grid=tuple(req.alpha_grid),
            strategies=tuple(req.strategies),
            opts=opts,
            doc_level=req.doc_level,
            complementarity_k=req.complementarity_k,
            meta=meta,
        )

    @app.post("/rag")
    def rag(req: RagRequest) -> dict:
        config = RagConfig(
            modality=req.modality,
            k=req.k,
            mode=req.mode,
            judge_votes=req.judge_votes,
            strict_hard_negative=req.strict_hard_negative,
            jobs=req.jobs,
            image_root=req.image_root,
        )
        retriever_opts = None
        if req.retriever is not None:
            retriever_opts = SearchOptions(
                retriever=req.retriever,
                k=req.k,
                ef=req.ef,
                strategy=req.strategy,
                alpha=req.alpha,
                channel=req.channel,
            )
        return eng.rag(
            req.store_dir,
            config,
            retriever_opts=retriever_opts,
            reader=req.reader,
            judge=req.judge,
            out_path=req.out_path,
        )

    @app.post("/report")
    def report(req: ReportRequest) -> dict:
        if (req.path is None) == (req.reports is None):
            raise InvalidParams("pass exactly one of path or reports")
        if req.path is not None:
            loaded = json.loads(Path(req.path).read_text())
            items = loaded.get("reports", [loaded]) if isinstance(loaded, dict) else loaded
        else:
            items = req.reports
        return {"document": emit_report(items, req.format)}

    return app


app = create_app()
