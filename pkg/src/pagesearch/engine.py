"""Store management and retrieval orchestration shared by the service and CLI.

An Engine loads on-disk stores (with an in-process cache keyed by manifest
mtime), builds per-channel runtime indexes on demand, optionally persists the
expensive ones under <store>/indexes/, and executes searches, benchmark
suites, and RAG runs. All outputs are deterministic: reruns with equal configs
produce byte-identical artifacts.

Retriever specs understood by search/benchmark:
  bm25          sparse lexical over page text
  dense         single-vector channel search (exact scan, or graph with --graph)
  maxsim        exact late-interaction over a multi-vector channel
  muvera        FDE stage 1 (top-ef) + exact MaxSim rescoring
  hybrid_text   bm25 + dense fused at equal weight
  multimodal    hybrid_text + image retriever fused with alpha
"""

from __future__ import annotations

import gzip
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bm25 as bm25_mod
from . import corpus as corpus_mod
from . import dense as dense_mod
from . import fde as fde_mod
from . import fusion as fusion_mod
from . import metrics as metrics_mod
from . import rag as rag_mod
from .corpus import CorpusHandle
from .dense import GraphIndexParams, SearchParams
from .errors import ChannelNotFound, InvalidParams, UnknownPage
from .fde import FdeParams
from .maxsim import MultiVectorStore, exact_maxsim_search
from .metrics import RetrievalRun
from .ranking import RankedList

DEFAULT_EF = 160
DENSE_TEXT, MULTI_TEXT = "dense_text", "multivector_text"
DENSE_IMAGE, MULTI_IMAGE = "dense_image", "multivector_image"


@dataclass(frozen=True)
class SearchOptions:
    retriever: str = "bm25"
    k: int = 20
    ef: int = DEFAULT_EF
    channel: str | None = None
    metric: str | None = None
    strategy: str = "rsf"
    alpha: float = 0.5
    rrf_k: int = 60
    pool: int | None = None
    image_retriever: str = "maxsim"  # image leg of multimodal: maxsim | muvera
    fde: FdeParams = FdeParams()
    graph: bool = False  # graph backend for dense / muvera stage 1
    graph_params: GraphIndexParams = GraphIndexParams()
    explain: bool = False

    def pool_size(self, k_eval: int | None = None) -> int:
        if self.pool is not None:
            return self.pool
        return fusion_mod.candidate_pool_size(k_eval if k_eval is not None else self.k)


def _params_tag(obj: dict) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True).encode("utf-8")
    ).hexdigest()[:12]


@dataclass
class _StoreState:
    handle: CorpusHandle
    checksum: str
    stamp: tuple
    bm25: bm25_mod.InvertedIndex | None = None
    mv_stores: dict = field(default_factory=dict)
    dense_indexes: dict = field(default_factory=dict)
    graph_indexes: dict = field(default_factory=dict)
    fde_indexes: dict = field(default_factory=dict)


class Engine:
    def __init__(self):
        self._stores: dict[str, _StoreState] = {}

    # -- store loading ------------------------------------------------------

    def _state(self, store_dir: str | Path) -> _StoreState:
        root = str(Path(store_dir).resolve())
        man = Path(root) / "manifest.json"
        try:
            st = man.stat()
            stamp = (st.st_mtime_ns, st.st_size)
        except FileNotFoundError:
            stamp = None
        cached = self._stores.get(root)
        if cached is not None and cached.stamp == stamp:
            return cached
        handle = corpus_mod.load(root)
        state = _StoreState(
            handle=handle, checksum=handle.corpus_checksum(), stamp=stamp
        )
        self._stores[root] = state
        return state

    def load_handle(self, store_dir: str | Path) -> CorpusHandle:
        return self._state(store_dir).handle

    # -- ingest -------------------------------------------------------------

    def ingest(
        self,
        store_dir: str | Path,
        corpus_path: str,
        queries_path: str | None = None,
        embeddings: list[dict] | None = None,
        query_embeddings: list[dict] | None = None,
        normalize: list[str] | None = None,
    ) -> dict:
        """Build a store directory from wire-format files; returns the manifest."""
        handle = corpus_mod.ingest_corpus(corpus_path)
        if queries_path:
            handle.queries = corpus_mod.ingest_queries(queries_path)
        norm = set(normalize or ())
        for spec in embeddings or ():
            corpus_mod.attach_embeddings(
                handle, spec["path"], spec["channel_id"],
                side="page", normalize=spec["channel_id"] in norm,
            )
        for spec in query_embeddings or ():
            corpus_mod.attach_embeddings(
                handle, spec["path"], spec["channel_id"],
                side="query", normalize=spec["channel_id"] in norm,
            )
        corpus_mod.persist(handle, store_dir)
        self._stores.pop(str(Path(store_dir).resolve()), None)
        return handle.manifest()

    # -- channel access -----------------------------------------------------

    @staticmethod
    def _channel(handle: CorpusHandle, channel_id: str, side: str = "page"):
        table = handle.channels if side == "page" else handle.query_channels
        if channel_id not in table:
            have = sorted(table) or ["<none>"]
            raise ChannelNotFound(
                f"{side} channel {channel_id!r} not attached (have: {', '.join(have)}); "
                f"attach it at ingest time"
            )
        return table[channel_id]

    def _query_vec(self, handle: CorpusHandle, query_id: str, channel_id: str) -> np.ndarray:
        ch = self._channel(handle, channel_id, side="query")
        if query_id not in ch.payloads:
            raise UnknownPage(f"query {query_id!r} has no embedding in {channel_id!r}")
        return ch.payloads[query_id]

    # -- index builders (cached per store) ----------------------------------

    def _bm25(self, state: _StoreState) -> bm25_mod.InvertedIndex:
        if state.bm25 is None:
            state.bm25 = bm25_mod.build_index(state.handle)
        return state.bm25

    def _mv_store(self, state: _StoreState, channel_id: str) -> MultiVectorStore:
        if channel_id not in state.mv_stores:
            ch = self._channel(state.handle, channel_id)
            state.mv_stores[channel_id] = MultiVectorStore(ch)
        return state.mv_stores[channel_id]

    def _dense(self, state: _StoreState, channel_id: str, metric: str) -> dense_mod.DenseIndex:
        key = (channel_id, metric)
        if key not in state.dense_indexes:
            ch = self._channel(state.handle, channel_id)
            state.dense_indexes[key] = dense_mod.build_exact(ch, metric)
        return state.dense_indexes[key]

    def _graph(
        self, state: _StoreState, channel_id: str, metric: str, params: GraphIndexParams
    ) -> dense_mod.GraphIndex:
        key = (channel_id, metric, params)
        if key not in state.graph_indexes:
            ch = self._channel(state.handle, channel_id)
            state.graph_indexes[key] = dense_mod.build_graph(ch, params, metric)
        return state.graph_indexes[key]

    def _fde_index(
        self, state: _StoreState, channel_id: str, params: FdeParams, store_root: Path | None = None
    ) -> fde_mod.FdeIndex:
        key = (channel_id, params)
        if key in state.fde_indexes:
            return state.fde_indexes[key]
        mv = self._mv_store(state, channel_id)
        index = None
        if store_root is not None:
            index = self._load_fde_cache(state, mv, channel_id, params, store_root)
        if index is None:
            index = fde_mod.build_fde_index(mv, params)
        state.fde_indexes[key] = index
        return index

    @staticmethod
    def _fde_cache_paths(channel_id: str, params: FdeParams, root: Path) -> tuple[Path, Path]:
        tag = _params_tag(params.to_json())
        base = root / "indexes" / f"fde.{channel_id}.{tag}"
        # not with_suffix: the tag after the last dot would be replaced
        return Path(f"{base}.npz"), Path(f"{base}.json")

    def _load_fde_cache(self, state, mv, channel_id, params, root: Path):
        npz_path, meta_path = self._fde_cache_paths(channel_id, params, root)
        if not (npz_path.exists() and meta_path.exists()):
            return None
        meta = json.loads(meta_path.read_text())
        ch = self._channel(state.handle, channel_id)
        if meta.get("channel_checksum") != ch.checksum():
            return None
        if meta.get("params") != params.to_json():
            return None
        with np.load(npz_path, allow_pickle=False) as z:
            ids = [str(s) for s in z["ids"]]
            fdes = z["fdes"].astype(np.float32)
        if ids != mv.page_ids:
            return None
        encoder = fde_mod.FdeEncoder(mv.dim, params)
        return fde_mod.FdeIndex(ids, fdes, encoder)

    def build_index(
        self,
        store_dir: str | Path,
        kind: str,
        channel: str | None = None,
        metric: str | None = None,
        fde_params: FdeParams = FdeParams(),
        graph_params: GraphIndexParams = GraphIndexParams(),
    ) -> dict:
        """Build an index and persist what is persistable under <store>/indexes."""
        state = self._state(store_dir)
        root = Path(store_dir)
        (root / "indexes").mkdir(parents=True, exist_ok=True)

        if kind == "bm25":
            index = self._bm25(state)
            payload = {
                "kind": "bm25",
                "doc_count": index.doc_count,
                "avg_doc_length": index.avg_doc_length,
                "postings": {t: p for t, p in sorted(index.postings.items())},
                "doc_lengths": index.doc_lengths,
                "page_ids": index.page_ids,
            }
            out = root / "indexes" / "bm25.json.gz"
            with gzip.open(out, "wt", encoding="utf-8") as f:
                json.dump(payload, f, sort_keys=True)
            return {"kind": "bm25", "terms": len(index.postings), "path": str(out)}

        if kind == "dense":
            cid = channel or DENSE_TEXT
            met = metric or self._default_metric(cid)
            index = self._dense(state, cid, met)
            return {
                "kind": "dense", "channel": cid, "metric": met,
                "vectors": len(index.page_ids), "dim": index.dim,
            }

        if kind == "graph":
            cid = channel or DENSE_TEXT
            met = metric or self._default_metric(cid)
            gidx = self._graph(state, cid, met, graph_params)
            tag = _params_tag({"M": graph_params.M, "efc": graph_params.ef_construction,
                               "seed": graph_params.seed, "metric": met})
            out = root / "indexes" / f"graph.{cid}.{tag}.json.gz"
            ch = self._channel(state.handle, cid)
            with gzip.open(out, "wt", encoding="utf-8") as f:
                json.dump(
                    {"channel_checksum": ch.checksum(), **gidx.to_payload()},
                    f, sort_keys=True,
                )
            return {
                "kind": "graph", "channel": cid, "metric": met,
                "nodes": len(gidx.page_ids), "max_level": gidx.max_level,
                "path": str(out),
            }

        if kind == "fde":
            cid = channel or MULTI_IMAGE
            index = self._fde_index(state, cid, fde_params)
            npz_path, meta_path = self._fde_cache_paths(cid, fde_params, root)
            np.savez(
                npz_path,
                ids=np.array(index.page_ids, dtype=np.str_),
                fdes=index.doc_fdes,
            )
            ch = self._channel(state.handle, cid)
            meta_path.write_text(
                json.dumps(
                    {
                        "params": fde_params.to_json(),
                        "fde_dim": fde_mod.fde_dim(fde_params),
                        "channel_checksum": ch.checksum(),
                    },
                    indent=2, sort_keys=True,
                )
                + "\n"
            )
            return {
                "kind": "fde", "channel": cid, "pages": len(index),
                "fde_dim": fde_mod.fde_dim(fde_params), "path": str(npz_path),
            }

        raise InvalidParams(f"unknown index kind {kind!r}")

    def _default_metric(self, channel_id: str) -> str:
        # dense text embeddings default to cosine; everything else raw dot
        return "cosine" if channel_id == DENSE_TEXT else "dot"

    # -- per-query ranked lists ----------------------------------------------

    def _ranked(
        self,
        state: _StoreState,
        opts: SearchOptions,
        query_id: str | None,
        query_text: str | None,
        depth: int,
        retriever: str | None = None,
        store_root: Path | None = None,
    ) -> RankedList:
        handle = state.handle
        r = retriever or opts.retriever

        if r == "bm25":
            text = query_text
            if text is None:
                if query_id is None or handle.queries is None:
                    raise InvalidParams("bm25 needs query text or a query_id")
                if query_id not in handle.queries.by_id:
                    raise UnknownPage(f"query {query_id!r} not in the bound query set")
                text = handle.queries.by_id[query_id].question
            return bm25_mod.bm25_search(self._bm25(state), text, top_n=depth)

        if query_id is None:
            raise InvalidParams(f"retriever {r!r} needs --query-id (embedded queries)")

        if r == "dense":
            cid = opts.channel or DENSE_TEXT
            met = opts.metric or self._default_metric(cid)
            qv = self._query_vec(handle, query_id, cid)
            if opts.graph:
                gidx = self._graph(state, cid, met, opts.graph_params)
                return dense_mod.graph_search(gidx, qv, SearchParams(ef=opts.ef, k=depth))
            return dense_mod.exact_search(self._dense(state, cid, met), qv, depth)

        if r == "maxsim":
            cid = opts.channel or MULTI_IMAGE
            qch = self._channel(handle, cid, side="query")
            if query_id not in qch.payloads:
                raise UnknownPage(f"query {query_id!r} has no embedding in {cid!r}")
            return exact_maxsim_search(
                self._mv_store(state, cid), qch.payloads[query_id], depth
            )

        if r == "muvera":
            cid = opts.channel or MULTI_IMAGE
            qch = self._channel(handle, cid, side="query")
            if query_id not in qch.payloads:
                raise UnknownPage(f"query {query_id!r} has no embedding in {cid!r}")
            mv = self._mv_store(state, cid)
            fidx = self._fde_index(state, cid, opts.fde, store_root)
            # fusion pools may exceed ef; a two-stage list can never be deeper
            # than its stage-1 candidate set, so clamp the run depth to ef
            k_run = min(depth, opts.ef)
            graph = None
            if opts.graph:
                graph = self._fde_graph(state, cid, opts)
            return fde_mod.two_stage_search(
                fidx, mv, qch.payloads[query_id],
                SearchParams(ef=opts.ef, k=k_run), graph=graph,
            )

        if r == "hybrid_text":
            lists = [
                self._ranked(state, opts, query_id, query_text, depth, "bm25", store_root),
                self._ranked(state, opts, query_id, query_text, depth, "dense", store_root),
            ]
            return fusion_mod.hybrid_text(lists[0], lists[1], opts.strategy, opts.rrf_k)

        if r == "multimodal":
            hybrid = self._ranked(state, opts, query_id, query_text, depth, "hybrid_text", store_root)
            image = self._image_leg(state, opts, query_id, query_text, depth, store_root)
            return fusion_mod.multimodal(hybrid, image, opts.alpha, opts.strategy, opts.rrf_k)

        raise InvalidParams(f"unknown retriever {r!r}")

    def _image_leg(self, state, opts, query_id, query_text, depth, store_root):
        leg = opts.image_retriever
        if leg not in ("maxsim", "muvera"):
            raise InvalidParams(f"unknown image retriever {leg!r}")
        image_opts = opts if opts.channel else replace(opts, channel=MULTI_IMAGE)
        return self._ranked(state, image_opts, query_id, query_text, depth, leg, store_root)

    def _fde_graph(self, state, channel_id, opts):
        """Opt-in graph over the FDE matrix for stage 1."""
        key = ("fde-graph", channel_id, opts.fde, opts.graph_params)
        if key not in state.graph_indexes:
            fidx = state.fde_indexes[(channel_id, opts.fde)]
            state.graph_indexes[key] = dense_mod.GraphIndex(
                fidx.page_ids, fidx.doc_fdes, opts.graph_params, metric="dot"
            )
        return state.graph_indexes[key]

    # -- public search -------------------------------------------------------

    def search(
        self,
        store_dir: str | Path,
        opts: SearchOptions,
        query_id: str | None = None,
        query_text: str | None = None,
    ) -> dict:
        state = self._state(store_dir)
        if opts.retriever == "muvera" and opts.ef < opts.k:
            raise InvalidParams(f"ef ({opts.ef}) must be >= k ({opts.k})")
        depth = (
            opts.pool_size(opts.k)
            if opts.retriever in ("hybrid_text", "multimodal")
            else opts.k
        )
        ranked = self._ranked(state, opts, query_id, query_text, depth, store_root=Path(store_dir))
        result = {
            "retriever": ranked.retriever or opts.retriever,
            "k": opts.k,
            "hits": ranked.top(opts.k).to_json(),
            "corpus_checksum": state.checksum,
        }
        if opts.explain and opts.retriever in ("hybrid_text", "multimodal"):
            result["explain"] = self._explain(state, opts, query_id, query_text, depth)
        return result

    def _explain(self, state, opts, query_id, query_text, depth) -> dict:
        if opts.retriever == "hybrid_text":
            lists = [
                self._ranked(state, opts, query_id, query_text, depth, "bm25"),
                self._ranked(state, opts, query_id, query_text, depth, "dense"),
            ]
            weights = [0.5, 0.5]
        else:
            lists = [
                self._ranked(state, opts, query_id, query_text, depth, "hybrid_text"),
                self._image_leg(state, opts, query_id, query_text, depth, None),
            ]
            weights = [1.0 - opts.alpha, opts.alpha]
        contributions = fusion_mod.fusion_contributions(
            lists, weights, opts.strategy, opts.rrf_k
        )
        return {
            pid: {tag: round(v, 12) for tag, v in sorted(parts.items())}
            for pid, parts in sorted(contributions.items())
        }

    # -- runs and benchmark ---------------------------------------------------

    def build_run(
        self, store_dir: str | Path, opts: SearchOptions, depth: int | None = None
    ) -> RetrievalRun:
        state = self._state(store_dir)
        if state.handle.queries is None:
            raise InvalidParams("store has no queries bound; ingest with --queries")
        depth = depth if depth is not None else opts.pool_size(opts.k)
        lists = {
            q.query_id: self._ranked(
                state, opts, q.query_id, None, depth, store_root=Path(store_dir)
            )
            for q in state.handle.queries
        }
        retriever = opts.retriever
        if retriever == "multimodal":
            retriever = f"multimodal[{opts.strategy},alpha={opts.alpha:g}]"
        elif retriever == "hybrid_text":
            retriever = f"hybrid_text[{opts.strategy}]"
        return RetrievalRun(
            lists=lists,
            retriever=retriever,
            config=self._config_echo(opts, depth),
            corpus_checksum=state.checksum,
        )

    @staticmethod
    def _config_echo(opts: SearchOptions, depth: int) -> dict:
        return {
            "retriever": opts.retriever,
            "k": opts.k,
            "ef": opts.ef,
            "channel": opts.channel,
            "metric": opts.metric,
            "strategy": opts.strategy,
            "alpha": opts.alpha,
            "rrf_k": opts.rrf_k,
            "pool": depth,
            "image_retriever": opts.image_retriever,
            "fde": opts.fde.to_json(),
            "graph": opts.graph,
        }

    def benchmark(
        self,
        store_dir: str | Path,
        out_dir: str | Path,
        retrievers: list[str] | None = None,
        ks: tuple[int, ...] = metrics_mod.DEFAULT_KS,
        alpha_grid: tuple[float, ...] = metrics_mod.DEFAULT_ALPHA_GRID,
        strategies: tuple[str, ...] = metrics_mod.DEFAULT_STRATEGIES,
        opts: SearchOptions = SearchOptions(),
        doc_level: bool = False,
        complementarity_k: int = 1,
        meta: dict | None = None,
    ) -> dict:
        """Run the suite, write report artifacts, and return a summary."""
        state = self._state(store_dir)
        handle = state.handle
        if handle.queries is None:
            raise InvalidParams("benchmark needs queries bound to the store")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        max_k = max(ks)
        pool = opts.pool_size(max_k)

        if retrievers is None:
            retrievers = self._available_retrievers(handle)

        runs: dict[str, RetrievalRun] = {}
        reports: dict[str, metrics_mod.RecallReport] = {}
        files: list[str] = []
        for r in retrievers:
            run = self.build_run(store_dir, replace(opts, retriever=r, k=max_k), depth=pool)
            runs[r] = run
            report = metrics_mod.evaluate(
                run, handle.queries, ks, corpus=handle, doc_level=doc_level
            )
            reports[r] = report
            path = out / f"report.{r}.json"
            path.write_text(metrics_mod.emit_report(report, "json", meta=meta))
            files.append(str(path))

        summary: dict = {
            "retrievers": {r: reports[r].recall for r in retrievers},
            "config": self._config_echo(opts, pool),
            "ks": list(ks),
            "corpus_checksum": state.checksum,
        }

        text_leg = "hybrid_text" if "hybrid_text" in runs else ("bm25" if "bm25" in runs else None)
        image_leg = next((r for r in ("maxsim", "muvera") if r in runs), None)

        if text_leg and image_leg:
            sweep = metrics_mod.alpha_sweep(
                runs[text_leg].lists,
                runs[image_leg].lists,
                handle.queries,
                alpha_grid=alpha_grid,
                strategies=strategies,
                ks=ks,
                rrf_k=opts.rrf_k,
                pool=pool,
                corpus=handle,
                corpus_checksum=state.checksum,
            )
            argmax = self._sweep_argmax(sweep, ks)
            sweep_doc = {
                "entries": [e.to_json() for e in sweep],
                "argmax": argmax,
                "text_leg": text_leg,
                "image_leg": image_leg,
            }
            sweep_json = out / "sweep.json"
            body: dict = {"reports": [sweep_doc]}
            if meta:
                body["meta"] = meta
            sweep_json.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
            files.append(str(sweep_json))
            sweep_md = out / "sweep.md"
            sweep_md.write_text(self._sweep_markdown(sweep, argmax, ks))
            files.append(str(sweep_md))
            summary["sweep_argmax"] = argmax

            comp = metrics_mod.exclusive_successes(
                runs[text_leg], runs[image_leg], handle.queries, complementarity_k, corpus=handle
            )
            comp_path = out / "complementarity.json"
            comp_path.write_text(metrics_mod.emit_report(comp, "json", meta=meta))
            files.append(str(comp_path))
            summary["complementarity"] = comp.counts()

        md_path = out / "benchmark.md"
        md_path.write_text(self._benchmark_markdown(reports, summary, ks))
        files.append(str(md_path))
        summary["files"] = files
        return summary

    @staticmethod
    def _available_retrievers(handle: CorpusHandle) -> list[str]:
        out = ["bm25"]
        have_p, have_q = set(handle.channels), set(handle.query_channels)
        if DENSE_TEXT in have_p and DENSE_TEXT in have_q:
            out += ["dense", "hybrid_text"]
        if MULTI_IMAGE in have_p and MULTI_IMAGE in have_q:
            out += ["maxsim", "muvera"]
        if "hybrid_text" in out and "maxsim" in out:
            out.append("multimodal")
        return out

    @staticmethod
    def _sweep_argmax(sweep: list[metrics_mod.SweepEntry], ks) -> dict:
        argmax: dict[str, list[dict]] = {}
        for k in ks:
            best = max(e.report.recall[str(k)] for e in sweep)
            argmax[str(k)] = [
                {"alpha": e.alpha, "strategy": e.strategy, "recall": best}
                for e in sweep
                if e.report.recall[str(k)] == best
            ]
        return argmax

    @staticmethod
    def _sweep_markdown(sweep, argmax, ks) -> str:
        best_cells = {
            (entry["alpha"], entry["strategy"], k)
            for k, entries in argmax.items()
            for entry in entries
        }
        lines = ["# alpha sweep", ""]
        header = "| strategy | alpha | " + " | ".join(f"Recall@{k}" for k in ks) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (2 + len(ks)))
        for e in sweep:
            cells = []
            for k in ks:
                v = e.report.recall[str(k)]
                mark = " *" if (e.alpha, e.strategy, str(k)) in best_cells else ""
                cells.append(f"{v:.4f}{mark}")
            lines.append(f"| {e.strategy} | {e.alpha:g} | " + " | ".join(cells) + " |")
        lines.append("")
        lines.append("`*` marks the best configuration per K (ties all marked).")
        lines.append("")
        return "\n".join(lines)

    @staticmethod
    def _benchmark_markdown(reports, summary, ks) -> str:
        lines = ["# benchmark", ""]
        lines.append("| retriever | " + " | ".join(f"Recall@{k}" for k in ks) + " |")
        lines.append("|" + "---|" * (1 + len(ks)))
        # mark the per-K argmax across retrievers
        best = {
            k: max(rep.recall[str(k)] for rep in reports.values()) for k in ks
        }
        for name, rep in reports.items():
            cells = []
            for k in ks:
                v = rep.recall[str(k)]
                mark = " *" if v == best[k] else ""
                cells.append(f"{v:.4f}{mark}")
            lines.append(f"| {name} | " + " | ".join(cells) + " |")
        lines.append("")
        if "complementarity" in summary:
            c = summary["complementarity"]
            lines.append(
                f"complementarity at K=1: a_only={c['a_only']} b_only={c['b_only']} "
                f"both={c['both']} neither={c['neither']}"
            )
            lines.append("")
        lines.append(f"corpus: `{summary['corpus_checksum'][:16]}`")
        lines.append("")
        return "\n".join(lines)

    # -- rag -------------------------------------------------------------------

    def rag(
        self,
        store_dir: str | Path,
        config: rag_mod.RagConfig,
        retriever_opts: SearchOptions | None = None,
        reader: str = "stub",
        judge: str = "stub",
        out_path: str | Path | None = None,
    ) -> dict:
        state = self._state(store_dir)
        handle = state.handle
        if handle.queries is None:
            raise InvalidParams("rag needs queries bound to the store")

        run = None
        if config.mode in ("standard", "hard_negative"):
            opts = retriever_opts or self._default_rag_retriever(handle, config)
            depth = max(config.k + 1, opts.pool_size(config.k))
            run = self.build_run(store_dir, opts, depth=depth)

        reader_client = (
            rag_mod.StubReader.for_queries(handle.queries)
            if reader == "stub"
            else rag_mod.HttpReader()
        )
        judge_client = rag_mod.StubJudge() if judge == "stub" else rag_mod.HttpJudge()

        outcome = rag_mod.run_rag(handle.queries, run, reader_client, judge_client, config, handle)
        report = rag_mod.qa_report(outcome, config)
        report["retriever"] = run.retriever if run is not None else None
        report["corpus_checksum"] = state.checksum
        if out_path is not None:
            Path(out_path).parent.mkdir(parents=True, exist_ok=True)
            Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return report

    @staticmethod
    def _default_rag_retriever(handle: CorpusHandle, config: rag_mod.RagConfig) -> SearchOptions:
        if config.modality == "image":
            return SearchOptions(retriever="maxsim", channel=MULTI_IMAGE, k=config.k)
        if DENSE_TEXT in handle.channels and DENSE_TEXT in handle.query_channels:
            return SearchOptions(retriever="hybrid_text", k=config.k)
        return SearchOptions(retriever="bm25", k=config.k)
