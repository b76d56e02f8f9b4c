"""Corpus data model: page/query records, embedding channels, manifests, and
the on-disk store.

Wire formats (one JSON object per line, UTF-8):
  corpus.jsonl   {doc_id, page_id, page_index, text, image_ref?}
  queries.jsonl  {query_id, question, gold_page_id, reference_answer}
  emb.<channel>.jsonl  {page_id, vectors: [[f...], ...]} for multi-vector
                       {page_id, vector: [f...]} for dense
                       (query-side files may use query_id as the id field)

Embeddings are stored as 32-bit floats; all size arithmetic uses 4 bytes per
value. Checksums are computed over content sorted by id, so ingestion order
never changes a manifest. A loaded handle is immutable and safe to share
across concurrent readers; all mutation happens single-writer at build time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatch,
    DuplicateId,
    IncompatibleStore,
    ParseError,
    UnknownPage,
)

FORMAT_VERSION = 1

KNOWN_CHANNELS = (
    "dense_text",
    "multivector_text",
    "dense_image",
    "multivector_image",
)


@dataclass(frozen=True)
class PageRecord:
    doc_id: str
    page_id: str
    page_index: int
    text: str
    image_ref: str | None = None

    def to_json(self) -> dict:
        rec = {
            "doc_id": self.doc_id,
            "page_id": self.page_id,
            "page_index": self.page_index,
            "text": self.text,
        }
        if self.image_ref is not None:
            rec["image_ref"] = self.image_ref
        return rec


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    question: str
    gold_page_id: str
    reference_answer: str

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "question": self.question,
            "gold_page_id": self.gold_page_id,
            "reference_answer": self.reference_answer,
        }


class QuerySet:
    """Queries in stable order (ascending query_id)."""

    def __init__(self, queries: list[QueryRecord]):
        self.queries = sorted(queries, key=lambda q: q.query_id)
        self.by_id = {q.query_id: q for q in self.queries}

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def ids(self) -> list[str]:
        return [q.query_id for q in self.queries]

    def checksum(self) -> str:
        return _sha256_lines(_canonical_line(q.to_json()) for q in self.queries)


@dataclass
class EmbeddingChannel:
    """One embedding channel: per-id payloads of uniform dimension.

    kind "dense" stores one (d,) vector per id; kind "multi" stores an (n, d)
    matrix per id with n >= 1.
    """

    channel_id: str
    kind: str  # "dense" | "multi"
    dim: int
    normalized: bool
    payloads: dict[str, np.ndarray]
    side: str = "page"  # "page" | "query"

    def sorted_ids(self) -> list[str]:
        return sorted(self.payloads)

    def total_vectors(self) -> int:
        if self.kind == "dense":
            return len(self.payloads)
        return sum(v.shape[0] for v in self.payloads.values())

    def nbytes(self) -> int:
        # 32-bit float semantics for all size math
        return self.total_vectors() * self.dim * 4

    def checksum(self) -> str:
        h = hashlib.sha256()
        for pid in self.sorted_ids():
            h.update(pid.encode("utf-8"))
            h.update(b"\0")
            h.update(np.ascontiguousarray(self.payloads[pid], dtype=np.float32).tobytes())
        return h.hexdigest()

    def manifest_entry(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "normalized": self.normalized,
            "ids": len(self.payloads),
            "total_vectors": self.total_vectors(),
            "bytes": self.nbytes(),
            "checksum": self.checksum(),
        }


class CorpusHandle:
    """Loaded corpus: pages, optional queries, and attached embedding channels."""

    def __init__(self, pages: list[PageRecord]):
        self.pages = sorted(pages, key=lambda p: p.page_id)
        self.by_page_id = {p.page_id: p for p in self.pages}
        self.doc_ids = sorted({p.doc_id for p in self.pages})
        self.channels: dict[str, EmbeddingChannel] = {}
        self.query_channels: dict[str, EmbeddingChannel] = {}
        self.queries: QuerySet | None = None

    @property
    def page_count(self) -> int:
        return len(self.pages)

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def doc_of(self, page_id: str) -> str:
        return self.by_page_id[page_id].doc_id

    def pages_of_doc(self, doc_id: str) -> list[str]:
        return [p.page_id for p in self.pages if p.doc_id == doc_id]

    def corpus_checksum(self) -> str:
        return _sha256_lines(_canonical_line(p.to_json()) for p in self.pages)

    def manifest(self) -> dict:
        man = {
            "format_version": FORMAT_VERSION,
            "page_count": self.page_count,
            "doc_count": self.doc_count,
            "query_count": len(self.queries) if self.queries is not None else 0,
            "corpus_checksum": self.corpus_checksum(),
            "queries_checksum": self.queries.checksum() if self.queries else None,
            "channels": {
                cid: ch.manifest_entry() for cid, ch in sorted(self.channels.items())
            },
            "query_channels": {
                cid: ch.manifest_entry()
                for cid, ch in sorted(self.query_channels.items())
            },
        }
        return man


def _canonical_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _sha256_lines(lines) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _read_jsonl(path: str | Path):
    """Yield (line_number, parsed object); raises ParseError on bad JSON."""
    with open(path, encoding="utf-8") as f:
        for i, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(i, f"invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise ParseError(i, "record is not an object")
            yield i, obj


def ingest_corpus(path: str | Path) -> CorpusHandle:
    """Parse corpus.jsonl into a handle, enforcing identity invariants."""
    pages: list[PageRecord] = []
    seen_pages: set[str] = set()
    seen_doc_index: set[tuple[str, int]] = set()
    for line, obj in _read_jsonl(path):
        for key in ("doc_id", "page_id", "page_index", "text"):
            if key not in obj:
                raise ParseError(line, f"missing field {key!r}")
        if not isinstance(obj["page_index"], int) or obj["page_index"] < 0:
            raise ParseError(line, "page_index must be a non-negative integer")
        if not isinstance(obj["text"], str):
            raise ParseError(line, "text must be a string")
        rec = PageRecord(
            doc_id=str(obj["doc_id"]),
            page_id=str(obj["page_id"]),
            page_index=obj["page_index"],
            text=obj["text"],
            image_ref=obj.get("image_ref"),
        )
        if rec.page_id in seen_pages:
            raise DuplicateId(f"duplicate page_id {rec.page_id!r}")
        key = (rec.doc_id, rec.page_index)
        if key in seen_doc_index:
            raise DuplicateId(f"duplicate (doc_id, page_index) {key!r}")
        seen_pages.add(rec.page_id)
        seen_doc_index.add(key)
        pages.append(rec)
    return CorpusHandle(pages)


def ingest_queries(path: str | Path) -> QuerySet:
    queries: list[QueryRecord] = []
    seen: set[str] = set()
    for line, obj in _read_jsonl(path):
        for key in ("query_id", "question", "gold_page_id", "reference_answer"):
            if key not in obj:
                raise ParseError(line, f"missing field {key!r}")
        rec = QueryRecord(
            query_id=str(obj["query_id"]),
            question=str(obj["question"]),
            gold_page_id=str(obj["gold_page_id"]),
            reference_answer=str(obj["reference_answer"]),
        )
        if rec.query_id in seen:
            raise DuplicateId(f"duplicate query_id {rec.query_id!r}")
        seen.add(rec.query_id)
        queries.append(rec)
    return QuerySet(queries)


def attach_embeddings(
    handle: CorpusHandle,
    path: str | Path,
    channel_id: str,
    side: str = "page",
    normalize: bool = False,
) -> CorpusHandle:
    """Attach an emb.<channel>.jsonl file to the handle (page or query side).

    Every embedded id must exist on its side; all payloads must share one
    dimension. normalize=True L2-normalizes rows at attach time (the cosine
    metric relies on this).
    """
    if side not in ("page", "query"):
        raise ValueError(f"side must be 'page' or 'query', got {side!r}")
    if side == "query" and handle.queries is None:
        raise UnknownPage("cannot attach query embeddings before queries are bound")
    valid_ids = (
        set(handle.by_page_id) if side == "page" else set(handle.queries.by_id)
    )

    payloads: dict[str, np.ndarray] = {}
    kind: str | None = None
    dim: int | None = None
    for line, obj in _read_jsonl(path):
        rid = obj.get("page_id", obj.get("query_id"))
        if rid is None:
            raise ParseError(line, "missing id field (page_id or query_id)")
        rid = str(rid)
        if rid not in valid_ids:
            raise UnknownPage(f"{side} id {rid!r} not present in corpus")
        if rid in payloads:
            raise DuplicateId(f"duplicate embedding for id {rid!r}")

        if "vector" in obj:
            rec_kind, arr = "dense", np.asarray(obj["vector"], dtype=np.float32)
            if arr.ndim != 1 or arr.size == 0:
                raise ParseError(line, "dense vector must be a non-empty flat array")
        elif "vectors" in obj:
            rec_kind = "multi"
            try:
                arr = np.asarray(obj["vectors"], dtype=np.float32)
            except ValueError as e:
                raise ParseError(line, f"ragged vector set: {e}") from e
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise ParseError(line, "multi-vector set must be non-empty n x d")
        else:
            raise ParseError(line, "record has neither 'vector' nor 'vectors'")

        if kind is None:
            kind = rec_kind
        elif kind != rec_kind:
            raise ParseError(line, f"mixed dense/multi records in channel {channel_id!r}")
        d = arr.shape[-1]
        if dim is None:
            dim = d
        elif d != dim:
            raise DimMismatch(
                f"channel {channel_id!r}: dim {d} at line {line}, expected {dim}"
            )
        payloads[rid] = arr

    if not payloads:
        raise ParseError(1, f"embedding file for channel {channel_id!r} is empty")

    if normalize:
        for rid, arr in payloads.items():
            norms = np.linalg.norm(arr, axis=-1, keepdims=True)
            payloads[rid] = np.where(norms > 0, arr / np.maximum(norms, 1e-30), arr)
    flagged = normalize or _all_unit_norm(payloads.values())

    channel = EmbeddingChannel(
        channel_id=channel_id,
        kind=kind,
        dim=int(dim),
        normalized=flagged,
        payloads=payloads,
        side=side,
    )
    target = handle.channels if side == "page" else handle.query_channels
    target[channel_id] = channel
    return handle


def _all_unit_norm(arrays, tol: float = 1e-4) -> bool:
    for arr in arrays:
        norms = np.linalg.norm(arr.astype(np.float64), axis=-1)
        if not np.all(np.abs(norms - 1.0) <= tol):
            return False
    return True


# ---------------------------------------------------------------------------
# Persistence. Layout:
#   <dir>/manifest.json
#   <dir>/corpus.jsonl
#   <dir>/queries.jsonl            (when queries bound)
#   <dir>/channels/<side>.<channel>.npz
#   <dir>/indexes/...              (written by index builders, not here)
# ---------------------------------------------------------------------------


def persist(handle: CorpusHandle, directory: str | Path) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "channels").mkdir(exist_ok=True)

    with open(root / "corpus.jsonl", "w", encoding="utf-8") as f:
        for p in handle.pages:
            f.write(_canonical_line(p.to_json()) + "\n")
    if handle.queries is not None:
        with open(root / "queries.jsonl", "w", encoding="utf-8") as f:
            for q in handle.queries:
                f.write(_canonical_line(q.to_json()) + "\n")

    for ch in list(handle.channels.values()) + list(handle.query_channels.values()):
        ids = ch.sorted_ids()
        counts = np.array(
            [1 if ch.kind == "dense" else ch.payloads[i].shape[0] for i in ids],
            dtype=np.int64,
        )
        data = np.concatenate(
            [np.atleast_2d(ch.payloads[i]).astype(np.float32) for i in ids], axis=0
        )
        np.savez(
            root / "channels" / f"{ch.side}.{ch.channel_id}.npz",
            ids=np.array(ids, dtype=np.str_),
            counts=counts,
            data=data,
        )

    with open(root / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(handle.manifest(), f, indent=2, sort_keys=True)
        f.write("\n")


def load(directory: str | Path) -> CorpusHandle:
    root = Path(directory)
    man_path = root / "manifest.json"
    if not man_path.exists():
        raise IncompatibleStore(f"no manifest.json in {root}")
    with open(man_path, encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise IncompatibleStore(
            f"store format {manifest.get('format_version')!r}, "
            f"engine supports {FORMAT_VERSION}"
        )

    handle = ingest_corpus(root / "corpus.jsonl")
    if (root / "queries.jsonl").exists():
        handle.queries = ingest_queries(root / "queries.jsonl")

    for side, key in (("page", "channels"), ("query", "query_channels")):
        for cid, entry in manifest.get(key, {}).items():
            npz_path = root / "channels" / f"{side}.{cid}.npz"
            if not npz_path.exists():
                raise IncompatibleStore(f"manifest lists {cid!r} but {npz_path} missing")
            with np.load(npz_path, allow_pickle=False) as z:
                ids = [str(s) for s in z["ids"]]
                counts = z["counts"]
                data = z["data"].astype(np.float32)
            payloads: dict[str, np.ndarray] = {}
            off = 0
            for rid, n in zip(ids, counts):
                block = data[off : off + int(n)]
                payloads[rid] = block[0] if entry["kind"] == "dense" else block
                off += int(n)
            ch = EmbeddingChannel(
                channel_id=cid,
                kind=entry["kind"],
                dim=int(entry["dim"]),
                normalized=bool(entry["normalized"]),
                payloads=payloads,
                side=side,
            )
            getattr(handle, key)[cid] = ch

    # checksums must reproduce exactly or the store is not the one described
    reloaded = handle.manifest()
    for field_name in ("corpus_checksum", "queries_checksum"):
        if reloaded[field_name] != manifest.get(field_name):
            raise IncompatibleStore(f"{field_name} mismatch after load")
    for key in ("channels", "query_channels"):
        for cid, entry in manifest.get(key, {}).items():
            if reloaded[key][cid]["checksum"] != entry["checksum"]:
                raise IncompatibleStore(f"channel {cid!r} checksum mismatch after load")
    return handle


def format_bytes(n: int) -> str:
    """Human-readable size with 3 significant digits (GB = 1e9 convention)."""
    for unit, scale in (("GB", 1e9), ("MB", 1e6), ("KB", 1e3)):
        if n >= scale:
            value = n / scale
            digits = max(0, 2 - int(np.floor(np.log10(value))))
            return f"{round(value, digits):g} {unit}"
    return f"{n} B"
