"""Retrieval metrics: Recall@K, complementarity between two runs, alpha
sweeps over multimodal fusion, and deterministic report emission.

Recall@K counts a query as a success when its single gold page appears in the
top K (page-level by default; doc-level success — any page of the gold
document — is a separate reporting option, never a replacement).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import CorpusHandle, QuerySet
from .errors import GoldNotFound, InvalidParams, QuerySetMismatch
from .fusion import multimodal
from .ranking import RankedList

DEFAULT_KS = (1, 5, 20)
DEFAULT_ALPHA_GRID = tuple(i / 10 for i in range(11))
DEFAULT_STRATEGIES = ("rsf", "rrf")


@dataclass
class RetrievalRun:
    lists: dict[str, RankedList]  # query_id -> ranked hits
    retriever: str = ""
    config: dict = field(default_factory=dict)
    corpus_checksum: str = ""

    def bind(self, queries: QuerySet) -> None:
        """Every query must appear exactly once."""
        have, want = set(self.lists), set(queries.by_id)
        if have != want:
            missing = sorted(want - have)[:5]
            extra = sorted(have - want)[:5]
            raise QuerySetMismatch(
                f"run/queries mismatch (missing {missing}, extra {extra})"
            )


def _resolve_gold(queries: QuerySet, corpus: CorpusHandle | None) -> None:
    if corpus is None:
        return
    for q in queries:
        if q.gold_page_id not in corpus.by_page_id:
            raise GoldNotFound(
                f"query {q.query_id!r}: gold page {q.gold_page_id!r} not in corpus"
            )


def gold_rank(ranked: RankedList, gold_page_id: str) -> int | None:
    return ranked.rank_of(gold_page_id)


def gold_doc_rank(
    ranked: RankedList, gold_page_id: str, corpus: CorpusHandle
) -> int | None:
    """Rank of the first page belonging to the gold page's document."""
    if gold_page_id not in corpus.by_page_id:
        raise GoldNotFound(f"gold page {gold_page_id!r} not in corpus")
    gold_doc = corpus.doc_of(gold_page_id)
    for i, (pid, _) in enumerate(ranked.hits, start=1):
        page = corpus.by_page_id.get(pid)
        if page is not None and page.doc_id == gold_doc:
            return i
    return None


def recall_at_k(
    run: RetrievalRun,
    queries: QuerySet,
    k: int,
    corpus: CorpusHandle | None = None,
    doc_level: bool = False,
) -> float:
    if k < 1:
        raise InvalidParams("K must be positive")
    if doc_level and corpus is None:
        raise InvalidParams("doc-level recall needs the corpus to map pages to docs")
    run.bind(queries)
    _resolve_gold(queries, corpus)
    hits = 0
    for q in queries:
        ranked = run.lists[q.query_id]
        rank = (
            gold_doc_rank(ranked, q.gold_page_id, corpus)
            if doc_level
            else gold_rank(ranked, q.gold_page_id)
        )
        if rank is not None and rank <= k:
            hits += 1
    return hits / len(queries) if len(queries) else 0.0


@dataclass
class RecallReport:
    retriever: str
    config: dict
    corpus_checksum: str
    recall: dict[str, float]  # str(K) -> fraction
    per_query: list[dict]  # {query_id, gold_rank|None [, gold_doc_rank]}
    doc_level_recall: dict[str, float] | None = None

    def to_json(self) -> dict:
        out = {
            "retriever": self.retriever,
            "config": self.config,
            "corpus_checksum": self.corpus_checksum,
            "recall": self.recall,
            "per_query": self.per_query,
        }
        if self.doc_level_recall is not None:
            out["doc_level_recall"] = self.doc_level_recall
        return out


def evaluate(
    run: RetrievalRun,
    queries: QuerySet,
    ks: tuple[int, ...] = DEFAULT_KS,
    corpus: CorpusHandle | None = None,
    doc_level: bool = False,
) -> RecallReport:
    run.bind(queries)
    _resolve_gold(queries, corpus)
    per_query = []
    for q in queries:
        ranked = run.lists[q.query_id]
        entry: dict = {"query_id": q.query_id, "gold_rank": gold_rank(ranked, q.gold_page_id)}
        if doc_level:
            entry["gold_doc_rank"] = gold_doc_rank(ranked, q.gold_page_id, corpus)
        per_query.append(entry)
    nq = len(queries)

    def frac(key: str, k: int) -> float:
        if not nq:
            return 0.0
        return sum(1 for e in per_query if e[key] is not None and e[key] <= k) / nq

    recall = {str(k): frac("gold_rank", k) for k in sorted(ks)}
    doc_recall = (
        {str(k): frac("gold_doc_rank", k) for k in sorted(ks)} if doc_level else None
    )
    return RecallReport(
        retriever=run.retriever,
        config=run.config,
        corpus_checksum=run.corpus_checksum,
        recall=recall,
        per_query=per_query,
        doc_level_recall=doc_recall,
    )


@dataclass
class ComplementarityReport:
    k: int
    retriever_a: str
    retriever_b: str
    a_only: list[str]
    b_only: list[str]
    both: list[str]
    neither: list[str]

    def counts(self) -> dict[str, int]:
        return {
            "a_only": len(self.a_only),
            "b_only": len(self.b_only),
            "both": len(self.both),
            "neither": len(self.neither),
        }

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "retriever_a": self.retriever_a,
            "retriever_b": self.retriever_b,
            "counts": self.counts(),
            "a_only": self.a_only,
            "b_only": self.b_only,
            "both": self.both,
            "neither": self.neither,
        }


def exclusive_successes(
    run_a: RetrievalRun,
    run_b: RetrievalRun,
    queries: QuerySet,
    k: int,
    corpus: CorpusHandle | None = None,
) -> ComplementarityReport:
    """Partition queries at K into A-only / B-only / both / neither successes."""
    run_a.bind(queries)
    run_b.bind(queries)
    _resolve_gold(queries, corpus)
    cells: dict[str, list[str]] = {"a_only": [], "b_only": [], "both": [], "neither": []}
    for q in queries:
        ra = gold_rank(run_a.lists[q.query_id], q.gold_page_id)
        rb = gold_rank(run_b.lists[q.query_id], q.gold_page_id)
        hit_a = ra is not None and ra <= k
        hit_b = rb is not None and rb <= k
        cell = ("both" if hit_b else "a_only") if hit_a else ("b_only" if hit_b else "neither")
        cells[cell].append(q.query_id)
    return ComplementarityReport(
        k=k,
        retriever_a=run_a.retriever,
        retriever_b=run_b.retriever,
        **cells,
    )


@dataclass
class SweepEntry:
    alpha: float
    strategy: str
    report: RecallReport

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "strategy": self.strategy, **self.report.to_json()}


def alpha_sweep(
    text_run_source: dict[str, RankedList],
    image_run_source: dict[str, RankedList],
    queries: QuerySet,
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    strategies: tuple[str, ...] = DEFAULT_STRATEGIES,
    ks: tuple[int, ...] = DEFAULT_KS,
    rrf_k: int = 60,
    pool: int | None = None,
    corpus: CorpusHandle | None = None,
    corpus_checksum: str = "",
) -> list[SweepEntry]:
    """One RecallReport per (alpha, strategy). Sources are per-query unimodal
    ranked lists; each is trimmed to the candidate pool before fusing."""
    if not alpha_grid or not strategies:
        raise InvalidParams("alpha grid and strategies must be non-empty")
    qids = queries.ids()
    for name, source in (("text", text_run_source), ("image", image_run_source)):
        if set(source) != set(qids):
            raise QuerySetMismatch(f"{name} run source does not cover the query set")

    def trimmed(source: dict[str, RankedList], qid: str) -> RankedList:
        lst = source[qid]
        return lst.top(pool) if pool is not None else lst

    entries = []
    for strategy in strategies:
        for alpha in alpha_grid:
            fused = {
                qid: multimodal(
                    trimmed(text_run_source, qid),
                    trimmed(image_run_source, qid),
                    alpha,
                    strategy=strategy,
                    rrf_k=rrf_k,
                )
                for qid in qids
            }
            run = RetrievalRun(
                lists=fused,
                retriever=f"multimodal[{strategy},alpha={alpha:g}]",
                config={
                    "alpha": alpha,
                    "strategy": strategy,
                    "rrf_k": rrf_k,
                    "pool": pool,
                },
                corpus_checksum=corpus_checksum,
            )
            entries.append(
                SweepEntry(alpha, strategy, evaluate(run, queries, ks, corpus=corpus))
            )
    return entries


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _as_dict(report) -> dict:
    return report.to_json() if hasattr(report, "to_json") else dict(report)


def emit_report(reports, fmt: str = "json", meta: dict | None = None) -> str:
    """Deterministic serialization of one report or a list of them. Wall-clock
    metadata, when supplied, stays isolated inside the optional "meta" object;
    everything else is a pure function of the inputs."""
    if fmt not in ("json", "markdown"):
        raise InvalidParams(f"unknown report format {fmt!r}")
    items = reports if isinstance(reports, (list, tuple)) else [reports]
    dicts = [_as_dict(r) for r in items]
    if fmt == "json":
        doc: dict = {"reports": dicts}
        if meta:
            doc["meta"] = meta
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    lines: list[str] = []
    for d in dicts:
        title = d.get("retriever") or "report"
        if "alpha" in d and "strategy" in d:
            title = f"{d['strategy']} alpha={d['alpha']:g}"
        lines.append(f"## {title}")
        lines.append("")
        if "recall" in d:
            lines.append("| K | Recall@K |")
            lines.append("|---|----------|")
            for k in sorted(d["recall"], key=int):
                lines.append(f"| {k} | {d['recall'][k]:.4f} |")
        if "counts" in d:
            lines.append("| cell | count |")
            lines.append("|------|-------|")
            for cell in ("a_only", "b_only", "both", "neither"):
                lines.append(f"| {cell} | {d['counts'][cell]} |")
        if "alignment_score" in d:
            lines.append("| metric | value |")
            lines.append("|--------|-------|")
            score = d["alignment_score"]
            lines.append(
                f"| alignment_score | {'n/a' if score is None else f'{score:.4f}'} |"
            )
            for key in ("avg_input_tokens", "avg_output_tokens", "abstentions"):
                if key in d:
                    val = d[key]
                    lines.append(
                        f"| {key} | {val:.2f} |" if isinstance(val, float) else f"| {key} | {val} |"
                    )
        if d.get("corpus_checksum"):
            lines.append("")
            lines.append(f"corpus: `{d['corpus_checksum'][:16]}`")
        lines.append("")
    if meta:
        lines.append(f"<!-- meta: {json.dumps(meta, sort_keys=True)} -->")
        lines.append("")
    return "\n".join(lines)
