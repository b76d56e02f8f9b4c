"""Shared fixtures.

Two corpora back most of the suite:

* ``clustered`` — a seeded 500-page multi-vector corpus with hierarchical
  structure (5 loose clusters, tight token spreads around per-doc centers) and
  100 queries of mixed noise. Golds are defined as the exact-MaxSim argmax, so
  any candidate pool large enough to contain the true best page recovers them;
  that makes recall monotone in the stage-1 pool size by construction.

* ``planted_store`` — a tiny on-disk store (10 docs x 2 pages, one-hot page
  directions, a unique token per page) where every retriever must put the gold
  page at rank 1. Used for end-to-end engine / service / CLI checks.

The terminal-summary hook prints one PASS/FAIL line per acceptance criterion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from pagesearch.corpus import EmbeddingChannel, QueryRecord, QuerySet
from pagesearch.engine import Engine
from pagesearch.fde import FdeParams, build_fde_index
from pagesearch.maxsim import MultiVectorStore


def _normed(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


class ClusteredCorpus:
    """Seeded multi-vector corpus: 500 pages x 20 tokens, d=32, 100 queries."""

    N_DOCS = 500
    N_TOKENS = 20
    DIM = 32
    N_QUERIES = 100
    SEED = 20240817

    def __init__(self):
        rng = np.random.default_rng(self.SEED)
        centers = _normed(rng.normal(size=(5, self.DIM)))
        self.page_ids = [f"p{i:03d}" for i in range(self.N_DOCS)]
        payloads: dict[str, np.ndarray] = {}
        for i, pid in enumerate(self.page_ids):
            doc_center = _normed(centers[i % 5] + 0.7 * rng.normal(size=self.DIM))
            payloads[pid] = _normed(
                doc_center + 0.15 * rng.normal(size=(self.N_TOKENS, self.DIM))
            ).astype(np.float32)
        channel = EmbeddingChannel(
            channel_id="multivector_text",
            kind="multi",
            dim=self.DIM,
            normalized=True,
            payloads=payloads,
        )
        self.store = MultiVectorStore(channel)

        # queries: 8 tokens sampled from a seed doc plus noise; 3 in 10 are
        # high-noise so stage-1 ordering actually has room to be wrong
        self.queries: list[tuple[str, np.ndarray, str]] = []
        for j in range(self.N_QUERIES):
            seed_doc = f"p{(j * 97) % self.N_DOCS:03d}"
            sel = rng.choice(self.N_TOKENS, size=8, replace=False)
            noise = 1.1 if j % 10 < 3 else 0.35
            q = _normed(
                payloads[seed_doc][sel] + noise * rng.normal(size=(8, self.DIM))
            ).astype(np.float32)
            gold = self.store.page_ids[int(np.argmax(self.store.all_scores(q)))]
            self.queries.append((f"q{j:03d}", q, gold))

    def query_set(self) -> QuerySet:
        return QuerySet(
            [
                QueryRecord(qid, f"question {qid}", gold, f"answer {qid}")
                for qid, _, gold in self.queries
            ]
        )


@pytest.fixture(scope="session")
def clustered() -> ClusteredCorpus:
    return ClusteredCorpus()


@pytest.fixture(scope="session")
def clustered_fde(clustered):
    """Default-parameter FDE index over the clustered corpus."""
    return build_fde_index(clustered.store, FdeParams())


# ---------------------------------------------------------------------------
# Planted store: every retriever should rank the gold page first.
# ---------------------------------------------------------------------------

PLANTED_DIM = 32


@dataclass
class PlantedFiles:
    root: Path
    corpus: Path
    queries: Path
    page_embeddings: dict[str, Path]  # channel_id -> path
    query_embeddings: dict[str, Path]
    golds: dict[str, str]  # query_id -> gold page_id
    questions: dict[str, str]
    page_ids: list[str]


def _unit(idx: int) -> list[float]:
    v = [0.0] * PLANTED_DIM
    v[idx] = 1.0
    return v


def _mix(parts: list[tuple[int, float]]) -> list[float]:
    v = [0.0] * PLANTED_DIM
    for idx, w in parts:
        v[idx] += w
    return v


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


@pytest.fixture(scope="session")
def planted_files(tmp_path_factory) -> PlantedFiles:
    root = tmp_path_factory.mktemp("planted")
    pages = []
    dense_rows = []
    mv_text_rows = []
    mv_image_rows = []
    page_ids = []
    for i in range(10):
        for j in range(2):
            idx = 2 * i + j
            pid = f"d{i}_p{j}"
            page_ids.append(pid)
            pages.append(
                {
                    "doc_id": f"d{i}",
                    "page_id": pid,
                    "page_index": j,
                    "text": f"token{idx:02d} filler shared where is the content",
                    "image_ref": f"inline:{pid}",
                }
            )
            dense_rows.append({"page_id": pid, "vector": _unit(idx)})
            mv_text_rows.append(
                {
                    "page_id": pid,
                    "vectors": [_unit(idx), _mix([(idx, 0.6), ((idx + 1) % 20, 0.2)])],
                }
            )
            mv_image_rows.append(
                {"page_id": pid, "vectors": [_unit(idx), _mix([(idx, 0.7)])]}
            )

    queries = []
    q_dense = []
    q_mv_text = []
    q_mv_image = []
    golds: dict[str, str] = {}
    questions: dict[str, str] = {}
    for i in range(10):
        qid = f"q{i:02d}"
        gidx = 2 * i + (i % 2)
        gold = f"d{i}_p{i % 2}"
        golds[qid] = gold
        questions[qid] = f"where is token{gidx:02d}"
        queries.append(
            {
                "query_id": qid,
                "question": questions[qid],
                "gold_page_id": gold,
                "reference_answer": f"answer {gidx:02d}",
            }
        )
        q_dense.append(
            {"query_id": qid, "vector": _mix([(gidx, 1.0), ((gidx + 5) % 20, 0.05)])}
        )
        q_mv_text.append(
            {"query_id": qid, "vectors": [_mix([(gidx, 1.0), ((gidx + 7) % 20, 0.02)])]}
        )
        q_mv_image.append(
            {"query_id": qid, "vectors": [_mix([(gidx, 0.9), ((gidx + 3) % 20, 0.05)])]}
        )

    corpus = root / "corpus.jsonl"
    queries_path = root / "queries.jsonl"
    _write_jsonl(corpus, pages)
    _write_jsonl(queries_path, queries)
    page_embeddings = {}
    query_embeddings = {}
    for cid, page_rows, query_rows in (
        ("dense_text", dense_rows, q_dense),
        ("multivector_text", mv_text_rows, q_mv_text),
        ("multivector_image", mv_image_rows, q_mv_image),
    ):
        p = root / f"emb.{cid}.jsonl"
        q = root / f"q.{cid}.jsonl"
        _write_jsonl(p, page_rows)
        _write_jsonl(q, query_rows)
        page_embeddings[cid] = p
        query_embeddings[cid] = q

    return PlantedFiles(
        root=root,
        corpus=corpus,
        queries=queries_path,
        page_embeddings=page_embeddings,
        query_embeddings=query_embeddings,
        golds=golds,
        questions=questions,
        page_ids=sorted(page_ids),
    )


def ingest_planted(files: PlantedFiles, store_dir: Path) -> dict:
    """Build a store from the planted files; returns the manifest."""
    return Engine().ingest(
        store_dir,
        str(files.corpus),
        queries_path=str(files.queries),
        embeddings=[
            {"channel_id": cid, "path": str(p)}
            for cid, p in sorted(files.page_embeddings.items())
        ],
        query_embeddings=[
            {"channel_id": cid, "path": str(p)}
            for cid, p in sorted(files.query_embeddings.items())
        ],
    )


@pytest.fixture(scope="session")
def planted_store(planted_files, tmp_path_factory) -> Path:
    store = tmp_path_factory.mktemp("planted-store") / "store"
    ingest_planted(planted_files, store)
    return store


# ---------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per criterion.
# ---------------------------------------------------------------------------

ACCEPTANCE_LABELS = {
    "test_c01_fde_dimension": "C01 FDE dimension (defaults -> 2560)",
    "test_c02_memory_estimator": "C02 memory estimator (1.65 GB / 33 MB / ratio 50)",
    "test_c03_maxsim_oracle": "C03 MaxSim kernel vs naive oracle (1e-6, 1000 cases)",
    "test_c04_two_stage_exactness": "C04 two-stage ef=N equals exact MaxSim",
    "test_c05_ef_monotonicity": "C05 recall non-decreasing over ef grid",
    "test_c06_fde_fidelity": "C06 FDE/MaxSim Spearman >= 0.8",
    "test_c07_fusion_invariances": "C07 fusion invariances (1000 trials)",
    "test_c08_bm25_oracle": "C08 BM25 vs independent reference (1e-9)",
    "test_c09_metrics": "C09 recall/complementarity + planted Recall@1 = 1.0",
    "test_c10_rag_offline_loop": "C10 offline RAG loop (oracle / hard-negative / votes)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, str] = {}
    for status, mark in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.rsplit("::", 1)[-1]
            if name not in ACCEPTANCE_LABELS:
                continue
            # a FAIL in any phase (setup/call/teardown) sticks
            if outcomes.get(name) != "FAIL":
                outcomes[name] = mark
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in ACCEPTANCE_LABELS.items():
        if name in outcomes:
            terminalreporter.write_line(f"{outcomes[name]}  {label}")
