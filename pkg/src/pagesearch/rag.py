"""Retrieval-augmented generation harness: context assembly per modality,
baseline modes, majority-vote judging, alignment scoring, token accounting.

Reader and judge are abstract client contracts. Deterministic in-process
stubs ship for offline tests (stub reader echoes the reference answer it was
given at construction; stub judge is string equality), so the whole loop
closes without any live service. HTTP clients configured via environment
variables implement the same contracts for real runs.

Context items are dicts: {"kind": "text", "page_id", "text"} or
{"kind": "image", "page_id", "data": bytes}. Images are opaque bytes — the
engine never decodes them.
"""

from __future__ import annotations

import base64
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .corpus import CorpusHandle, QueryRecord, QuerySet
from .errors import (
    EmptyList,
    GoldNotFound,
    InvalidParams,
    JudgeError,
    NoScoredResults,
    PayloadMissing,
    ReaderError,
    RunAborted,
)
from .metrics import RetrievalRun


class ReaderClient(Protocol):
    def answer(self, question: str, context: list[dict]) -> dict:
        """Returns {"answer": str, "input_tokens": int, "output_tokens": int}."""
        ...


class JudgeClient(Protocol):
    def judge(self, question: str, system_answer: str, reference_answer: str) -> bool:
        ...


@dataclass(frozen=True)
class RagConfig:
    modality: str = "text"  # "text" | "image"
    k: int = 1
    mode: str = "standard"  # standard | no_retrieval | hard_negative | oracle
    judge_votes: int = 3
    strict_hard_negative: bool = False  # exclude every page of the gold document
    jobs: int = 4
    image_root: str | None = None
    max_reader_failure_rate: float = 0.10

    def __post_init__(self):
        if self.modality not in ("text", "image"):
            raise InvalidParams(f"unknown modality {self.modality!r}")
        if self.mode not in ("standard", "no_retrieval", "hard_negative", "oracle"):
            raise InvalidParams(f"unknown mode {self.mode!r}")
        if self.judge_votes < 1 or self.judge_votes % 2 == 0:
            raise InvalidParams("judge_votes must be an odd positive integer")
        if self.k < 1:
            raise InvalidParams("k must be positive")
        if self.jobs < 1:
            raise InvalidParams("jobs must be positive")

    def to_json(self) -> dict:
        return {
            "modality": self.modality,
            "k": self.k,
            "mode": self.mode,
            "judge_votes": self.judge_votes,
            "strict_hard_negative": self.strict_hard_negative,
            "jobs": self.jobs,
        }


@dataclass
class QaResult:
    query_id: str
    answer: str
    input_tokens: int
    output_tokens: int
    verdicts: list[bool]
    final: bool | None  # None when the judge abstained
    abstained: bool = False

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "answer": self.answer,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "verdicts": self.verdicts,
            "final": self.final,
            "abstained": self.abstained,
        }


# ---------------------------------------------------------------------------
# Context assembly
# ---------------------------------------------------------------------------


def _payload_for(page_id: str, config: RagConfig, corpus: CorpusHandle) -> dict:
    page = corpus.by_page_id[page_id]
    if config.modality == "text":
        return {"kind": "text", "page_id": page_id, "text": page.text}
    if page.image_ref is None:
        raise PayloadMissing(f"page {page_id!r} has no image_ref")
    ref_path = Path(config.image_root or ".") / page.image_ref
    if ref_path.is_file():
        data = ref_path.read_bytes()
    else:
        # opaque inline reference; hand the raw bytes through untouched
        data = page.image_ref.encode("utf-8")
    return {"kind": "image", "page_id": page_id, "data": data}


def assemble_context(
    query: QueryRecord,
    run: RetrievalRun | None,
    config: RagConfig,
    corpus: CorpusHandle,
) -> list[dict]:
    """Context items in retrieval rank order, per the configured mode."""
    if config.mode == "no_retrieval":
        return []
    if config.mode == "oracle":
        if query.gold_page_id not in corpus.by_page_id:
            raise GoldNotFound(f"gold page {query.gold_page_id!r} not in corpus")
        return [_payload_for(query.gold_page_id, config, corpus)]

    if run is None or query.query_id not in run.lists:
        raise InvalidParams(f"mode {config.mode!r} needs a retrieval run covering {query.query_id!r}")
    ranked = run.lists[query.query_id]

    if config.mode == "hard_negative":
        if query.gold_page_id not in corpus.by_page_id:
            raise GoldNotFound(f"gold page {query.gold_page_id!r} not in corpus")
        excluded = {query.gold_page_id}
        if config.strict_hard_negative:
            excluded.update(corpus.pages_of_doc(corpus.doc_of(query.gold_page_id)))
        for pid, _ in ranked:
            if pid not in excluded:
                return [_payload_for(pid, config, corpus)]
        raise EmptyList(f"no non-gold candidate available for {query.query_id!r}")

    return [_payload_for(pid, config, corpus) for pid, _ in ranked.hits[: config.k]]


# ---------------------------------------------------------------------------
# Judging
# ---------------------------------------------------------------------------


def judge_majority(
    question: str,
    system_answer: str,
    reference: str,
    judge: JudgeClient,
    votes: int = 3,
) -> tuple[bool | None, list[bool], bool]:
    """Run the judge `votes` times; final verdict is the majority. A vote that
    fails twice abstains the whole query (partial verdicts are preserved).
    Returns (final_or_None, verdicts, abstained)."""
    if votes < 1 or votes % 2 == 0:
        raise InvalidParams("votes must be an odd positive integer")
    verdicts: list[bool] = []
    for _ in range(votes):
        verdict = None
        for _attempt in range(2):
            try:
                verdict = bool(judge.judge(question, system_answer, reference))
                break
            except Exception:
                continue
        if verdict is None:
            return None, verdicts, True
        verdicts.append(verdict)
    return sum(verdicts) > votes // 2, verdicts, False


def alignment_score(results: list[QaResult]) -> float:
    scored = [r for r in results if not r.abstained and r.final is not None]
    if not scored:
        raise NoScoredResults("every query abstained; nothing to score")
    return sum(1 for r in scored if r.final) / len(scored)


# ---------------------------------------------------------------------------
# The run loop
# ---------------------------------------------------------------------------


@dataclass
class RagOutcome:
    results: list[QaResult]
    reader_failures: list[dict] = field(default_factory=list)


def run_rag(
    queries: QuerySet,
    retriever_run: RetrievalRun | None,
    reader: ReaderClient,
    judge: JudgeClient,
    config: RagConfig,
    corpus: CorpusHandle,
) -> RagOutcome:
    """One QaResult per query (reader failures excluded and recorded). Queries
    run with bounded concurrency; results are assembled by query_id so the
    outcome never depends on completion order. More than
    max_reader_failure_rate failed reader calls aborts the whole run."""
    contexts = {
        q.query_id: assemble_context(q, retriever_run, config, corpus) for q in queries
    }

    def one(q: QueryRecord) -> tuple[str, QaResult | None, str | None]:
        try:
            resp = reader.answer(q.question, contexts[q.query_id])
        except Exception as e:
            return q.query_id, None, f"{type(e).__name__}: {e}"
        final, verdicts, abstained = judge_majority(
            q.question, str(resp["answer"]), q.reference_answer, judge, config.judge_votes
        )
        result = QaResult(
            query_id=q.query_id,
            answer=str(resp["answer"]),
            input_tokens=int(resp.get("input_tokens", 0)),
            output_tokens=int(resp.get("output_tokens", 0)),
            verdicts=verdicts,
            final=final,
            abstained=abstained,
        )
        return q.query_id, result, None

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        outcomes = list(pool.map(one, list(queries)))

    outcomes.sort(key=lambda t: t[0])
    results = [r for _, r, err in outcomes if err is None]
    failures = [{"query_id": qid, "error": err} for qid, r, err in outcomes if err is not None]

    if len(queries) and len(failures) / len(queries) > config.max_reader_failure_rate:
        raise RunAborted(
            f"{len(failures)}/{len(queries)} reader calls failed "
            f"(> {config.max_reader_failure_rate:.0%})"
        )
    return RagOutcome(results=results, reader_failures=failures)


def qa_report(outcome: RagOutcome, config: RagConfig) -> dict:
    """qa_report.json shape: config echo, alignment, token averages, per-query."""
    results = outcome.results
    try:
        alignment = alignment_score(results)
    except NoScoredResults:
        alignment = None
    n = len(results)
    return {
        "config": config.to_json(),
        "alignment_score": alignment,
        "avg_input_tokens": (sum(r.input_tokens for r in results) / n) if n else 0.0,
        "avg_output_tokens": (sum(r.output_tokens for r in results) / n) if n else 0.0,
        "scored": sum(1 for r in results if not r.abstained),
        "abstentions": sum(1 for r in results if r.abstained),
        "reader_failures": outcome.reader_failures,
        "per_query": [r.to_json() for r in results],
    }


# ---------------------------------------------------------------------------
# Clients: deterministic stubs + HTTP implementations
# ---------------------------------------------------------------------------


def _token_count(text: str) -> int:
    return len(text.split())


class StubReader:
    """Echoes the reference answer for known questions when given any context;
    answers a fixed refusal string on empty context. Token counts are simple
    deterministic functions of the payload so accounting math is testable."""

    NO_CONTEXT_ANSWER = "no context available"

    def __init__(self, answer_key: dict[str, str]):
        self.answer_key = dict(answer_key)

    @classmethod
    def for_queries(cls, queries: QuerySet) -> "StubReader":
        return cls({q.question: q.reference_answer for q in queries})

    def answer(self, question: str, context: list[dict]) -> dict:
        input_tokens = _token_count(question)
        for item in context:
            if item["kind"] == "text":
                input_tokens += _token_count(item["text"])
            else:
                input_tokens += max(1, len(item["data"]) // 4)
        text = self.answer_key.get(question, "") if context else self.NO_CONTEXT_ANSWER
        return {
            "answer": text,
            "input_tokens": input_tokens,
            "output_tokens": _token_count(text),
        }


class StubJudge:
    """String equality after whitespace normalization."""

    def judge(self, question: str, system_answer: str, reference_answer: str) -> bool:
        return " ".join(system_answer.split()) == " ".join(reference_answer.split())


class ScriptedJudge:
    """Replays a fixed verdict sequence; raising entries simulate failures."""

    def __init__(self, script: list):
        self.script = list(script)
        self.calls = 0

    def judge(self, question: str, system_answer: str, reference_answer: str) -> bool:
        i = self.calls
        self.calls += 1
        item = self.script[i % len(self.script)]
        if item == "fail":
            raise JudgeError("scripted failure")
        return bool(item)


class FlakyReader:
    """Wraps a reader; fails on the given question set. For abort-path tests."""

    def __init__(self, inner: ReaderClient, fail_questions: set[str]):
        self.inner = inner
        self.fail_questions = set(fail_questions)

    def answer(self, question: str, context: list[dict]) -> dict:
        if question in self.fail_questions:
            raise ReaderError("scripted reader failure")
        return self.inner.answer(question, context)


class HttpReader:
    """POSTs {model, question, context:[{type,text|image_b64}]} and expects
    {answer, input_tokens, output_tokens}. Configured via environment:
    PAGESEARCH_READER_URL, PAGESEARCH_READER_MODEL, PAGESEARCH_READER_TOKEN."""

    def __init__(self, url: str | None = None, model: str | None = None, token: str | None = None):
        self.url = url or os.environ.get("PAGESEARCH_READER_URL", "")
        self.model = model or os.environ.get("PAGESEARCH_READER_MODEL", "")
        self.token = token or os.environ.get("PAGESEARCH_READER_TOKEN", "")
        if not self.url:
            raise ReaderError("reader URL not configured (PAGESEARCH_READER_URL)")

    def answer(self, question: str, context: list[dict]) -> dict:
        import httpx

        items = []
        for item in context:
            if item["kind"] == "text":
                items.append({"type": "text", "text": item["text"]})
            else:
                items.append(
                    {"type": "image", "image_b64": base64.b64encode(item["data"]).decode()}
                )
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        try:
            resp = httpx.post(
                self.url,
                json={"model": self.model, "question": question, "context": items},
                headers=headers,
                timeout=120.0,
            )
            resp.raise_for_status()
            body = resp.json()
            return {
                "answer": body["answer"],
                "input_tokens": int(body.get("input_tokens", 0)),
                "output_tokens": int(body.get("output_tokens", 0)),
            }
        except Exception as e:
            raise ReaderError(f"reader call failed: {e}") from e


class HttpJudge:
    """POSTs {model, question, system_answer, reference_answer}, expects
    {score: bool}. Env: PAGESEARCH_JUDGE_URL / _MODEL / _TOKEN."""

    def __init__(self, url: str | None = None, model: str | None = None, token: str | None = None):
        self.url = url or os.environ.get("PAGESEARCH_JUDGE_URL", "")
        self.model = model or os.environ.get("PAGESEARCH_JUDGE_MODEL", "")
        self.token = token or os.environ.get("PAGESEARCH_JUDGE_TOKEN", "")
        if not self.url:
            raise JudgeError("judge URL not configured (PAGESEARCH_JUDGE_URL)")

    def judge(self, question: str, system_answer: str, reference_answer: str) -> bool:
        import httpx

        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        try:
            resp = httpx.post(
                self.url,
                json={
                    "model": self.model,
                    "question": question,
                    "system_answer": system_answer,
                    "reference_answer": reference_answer,
                },
                headers=headers,
                timeout=60.0,
            )
            resp.raise_for_status()
            return bool(resp.json()["score"])
        except Exception as e:
            raise JudgeError(f"judge call failed: {e}") from e
