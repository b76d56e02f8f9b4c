"""Context assembly modes, majority-vote judging, stub clients, and the
offline question-answering loop."""

import pytest

from pagesearch.corpus import CorpusHandle, PageRecord, QueryRecord, QuerySet
from pagesearch.errors import (
    EmptyList,
    GoldNotFound,
    InvalidParams,
    JudgeError,
    NoScoredResults,
    PayloadMissing,
    ReaderError,
    RunAborted,
)
from pagesearch.metrics import RetrievalRun
from pagesearch.rag import (
    FlakyReader,
    HttpJudge,
    HttpReader,
    QaResult,
    RagConfig,
    ScriptedJudge,
    StubJudge,
    StubReader,
    alignment_score,
    assemble_context,
    judge_majority,
    qa_report,
    run_rag,
)
from pagesearch.ranking import RankedList


def rag_corpus() -> CorpusHandle:
    return CorpusHandle(
        [
            PageRecord("d1", "d1_p0", 0, "alpha text", image_ref="inline:d1_p0"),
            PageRecord("d1", "d1_p1", 1, "alpha more", image_ref="inline:d1_p1"),
            PageRecord("d2", "d2_p0", 0, "beta text", image_ref="inline:d2_p0"),
            PageRecord("d3", "d3_p0", 0, "gamma text"),
        ]
    )


QUERY = QueryRecord("q0", "where is alpha", "d1_p0", "alpha answer")


def one_query_run(page_ids: list[str]) -> RetrievalRun:
    hits = [(pid, float(len(page_ids) - i)) for i, pid in enumerate(page_ids)]
    return RetrievalRun(lists={"q0": RankedList(hits)})


def build_world(n: int = 10):
    pages = [PageRecord(f"d{i}", f"d{i}_p0", 0, f"token{i:02d} content here") for i in range(n)]
    queries = QuerySet(
        [
            QueryRecord(f"q{i:02d}", f"where is token{i:02d}", f"d{i}_p0", f"answer {i:02d}")
            for i in range(n)
        ]
    )
    run = RetrievalRun(
        lists={
            f"q{i:02d}": RankedList([(f"d{i}_p0", 2.0), (f"d{(i + 1) % n}_p0", 1.0)])
            for i in range(n)
        }
    )
    return CorpusHandle(pages), queries, run


class TestRagConfig:
    def test_validation(self):
        with pytest.raises(InvalidParams):
            RagConfig(modality="video")
        with pytest.raises(InvalidParams):
            RagConfig(mode="weird")
        with pytest.raises(InvalidParams):
            RagConfig(judge_votes=2)
        with pytest.raises(InvalidParams):
            RagConfig(judge_votes=0)
        with pytest.raises(InvalidParams):
            RagConfig(k=0)
        with pytest.raises(InvalidParams):
            RagConfig(jobs=0)

    def test_json_echo_omits_local_paths(self):
        config = RagConfig(image_root="/tmp/somewhere", max_reader_failure_rate=0.5)
        assert set(config.to_json()) == {
            "modality",
            "k",
            "mode",
            "judge_votes",
            "strict_hard_negative",
            "jobs",
        }


class TestAssembleContext:
    def test_standard_takes_top_k_in_rank_order(self):
        run = one_query_run(["d1_p0", "d1_p1", "d2_p0"])
        config = RagConfig(k=2)
        context = assemble_context(QUERY, run, config, rag_corpus())
        assert [c["page_id"] for c in context] == ["d1_p0", "d1_p1"]
        assert context[0] == {"kind": "text", "page_id": "d1_p0", "text": "alpha text"}

    def test_no_retrieval_is_empty(self):
        config = RagConfig(mode="no_retrieval")
        assert assemble_context(QUERY, None, config, rag_corpus()) == []

    def test_oracle_is_exactly_the_gold_page(self):
        config = RagConfig(mode="oracle")
        context = assemble_context(QUERY, None, config, rag_corpus())
        assert [c["page_id"] for c in context] == ["d1_p0"]

    def test_oracle_missing_gold(self):
        config = RagConfig(mode="oracle")
        ghost = QueryRecord("q0", "?", "nope", "x")
        with pytest.raises(GoldNotFound):
            assemble_context(ghost, None, config, rag_corpus())

    def test_hard_negative_takes_first_non_gold(self):
        run = one_query_run(["d1_p0", "d1_p1", "d2_p0"])
        config = RagConfig(mode="hard_negative")
        context = assemble_context(QUERY, run, config, rag_corpus())
        assert [c["page_id"] for c in context] == ["d1_p1"]

    def test_strict_hard_negative_excludes_gold_document(self):
        run = one_query_run(["d1_p0", "d1_p1", "d2_p0"])
        config = RagConfig(mode="hard_negative", strict_hard_negative=True)
        context = assemble_context(QUERY, run, config, rag_corpus())
        assert [c["page_id"] for c in context] == ["d2_p0"]

    def test_hard_negative_exhausted(self):
        run = one_query_run(["d1_p0"])
        config = RagConfig(mode="hard_negative")
        with pytest.raises(EmptyList):
            assemble_context(QUERY, run, config, rag_corpus())

    def test_hard_negative_missing_gold(self):
        run = one_query_run(["d1_p0"])
        ghost = QueryRecord("q0", "?", "nope", "x")
        config = RagConfig(mode="hard_negative")
        with pytest.raises(GoldNotFound):
            assemble_context(ghost, run, config, rag_corpus())

    def test_standard_requires_covering_run(self):
        config = RagConfig()
        with pytest.raises(InvalidParams):
            assemble_context(QUERY, None, config, rag_corpus())
        other = RetrievalRun(lists={"q9": RankedList([("d1_p0", 1.0)])})
        with pytest.raises(InvalidParams):
            assemble_context(QUERY, other, config, rag_corpus())

    def test_image_modality_inline_reference_bytes(self):
        run = one_query_run(["d1_p0"])
        config = RagConfig(modality="image")
        context = assemble_context(QUERY, run, config, rag_corpus())
        assert context[0]["kind"] == "image"
        assert context[0]["data"] == b"inline:d1_p0"

    def test_image_modality_reads_file_payload(self, tmp_path):
        (tmp_path / "page.png").write_bytes(b"\x89PNG fake")
        corpus = CorpusHandle([PageRecord("d1", "d1_p0", 0, "t", image_ref="page.png")])
        config = RagConfig(modality="image", mode="oracle", image_root=str(tmp_path))
        context = assemble_context(QUERY, None, config, corpus)
        assert context[0]["data"] == b"\x89PNG fake"

    def test_image_modality_missing_ref(self):
        gold_d3 = QueryRecord("q0", "?", "d3_p0", "x")
        config = RagConfig(modality="image", mode="oracle")
        with pytest.raises(PayloadMissing):
            assemble_context(gold_d3, None, config, rag_corpus())


class TestJudgeMajority:
    def test_two_of_three_passes(self):
        final, verdicts, abstained = judge_majority(
            "?", "a", "a", ScriptedJudge([True, True, False]), votes=3
        )
        assert (final, verdicts, abstained) == (True, [True, True, False], False)

    def test_one_of_three_fails(self):
        final, verdicts, abstained = judge_majority(
            "?", "a", "a", ScriptedJudge([False, False, True]), votes=3
        )
        assert (final, verdicts, abstained) == (False, [False, False, True], False)

    def test_single_failure_retries_once(self):
        judge = ScriptedJudge(["fail", True, True, True])
        final, verdicts, abstained = judge_majority("?", "a", "a", judge, votes=3)
        assert (final, abstained) == (True, False)
        assert verdicts == [True, True, True]
        assert judge.calls == 4

    def test_double_failure_abstains_preserving_partials(self):
        judge = ScriptedJudge([True, "fail", "fail", "fail"])
        final, verdicts, abstained = judge_majority("?", "a", "a", judge, votes=3)
        assert final is None
        assert verdicts == [True]
        assert abstained is True

    def test_single_vote(self):
        final, verdicts, abstained = judge_majority("?", "a", "a", ScriptedJudge([False]), votes=1)
        assert (final, verdicts, abstained) == (False, [False], False)

    def test_even_votes_rejected(self):
        with pytest.raises(InvalidParams):
            judge_majority("?", "a", "a", StubJudge(), votes=2)
        with pytest.raises(InvalidParams):
            judge_majority("?", "a", "a", StubJudge(), votes=0)


class TestAlignment:
    def qa(self, qid, final, abstained=False):
        return QaResult(qid, "a", 1, 1, [], final, abstained)

    def test_half_right(self):
        results = [self.qa(f"q{i}", i < 90) for i in range(180)]
        assert alignment_score(results) == pytest.approx(0.5)

    def test_abstentions_excluded_from_denominator(self):
        results = [self.qa("q0", True), self.qa("q1", None, abstained=True)]
        assert alignment_score(results) == 1.0

    def test_nothing_scored(self):
        with pytest.raises(NoScoredResults):
            alignment_score([self.qa("q0", None, abstained=True)])


class TestStubClients:
    def test_reader_echoes_reference(self):
        reader = StubReader({"where is alpha": "alpha answer"})
        resp = reader.answer(
            "where is alpha", [{"kind": "text", "page_id": "x", "text": "alpha text"}]
        )
        assert resp["answer"] == "alpha answer"
        assert resp["input_tokens"] == 3 + 2
        assert resp["output_tokens"] == 2

    def test_reader_without_context_refuses(self):
        reader = StubReader({"where is alpha": "alpha answer"})
        resp = reader.answer("where is alpha", [])
        assert resp["answer"] == StubReader.NO_CONTEXT_ANSWER
        assert resp["output_tokens"] == 3

    def test_reader_unknown_question(self):
        resp = StubReader({}).answer("??", [{"kind": "text", "page_id": "x", "text": "t"}])
        assert resp["answer"] == ""
        assert resp["output_tokens"] == 0

    def test_reader_image_token_accounting(self):
        reader = StubReader({})
        resp = reader.answer("q", [{"kind": "image", "page_id": "x", "data": b"12345678"}])
        assert resp["input_tokens"] == 1 + 2
        tiny = reader.answer("q", [{"kind": "image", "page_id": "x", "data": b"abc"}])
        assert tiny["input_tokens"] == 1 + 1

    def test_reader_for_queries(self):
        _, queries, _ = build_world(3)
        reader = StubReader.for_queries(queries)
        assert reader.answer_key["where is token01"] == "answer 01"

    def test_judge_normalizes_whitespace(self):
        judge = StubJudge()
        assert judge.judge("?", "a   b", "a b") is True
        assert judge.judge("?", "a b", "a c") is False


class TestRunRag:
    def test_oracle_loop_scores_perfectly(self):
        corpus, queries, run = build_world(6)
        config = RagConfig(mode="oracle", judge_votes=3)
        outcome = run_rag(queries, run, StubReader.for_queries(queries), StubJudge(), config, corpus)
        assert [r.query_id for r in outcome.results] == queries.ids()
        assert all(r.final is True for r in outcome.results)
        assert all(r.verdicts == [True, True, True] for r in outcome.results)
        assert outcome.reader_failures == []

    def test_report_schema_and_averages(self):
        corpus, queries, run = build_world(4)
        config = RagConfig(mode="oracle")
        outcome = run_rag(queries, run, StubReader.for_queries(queries), StubJudge(), config, corpus)
        report = qa_report(outcome, config)
        assert set(report) == {
            "config",
            "alignment_score",
            "avg_input_tokens",
            "avg_output_tokens",
            "scored",
            "abstentions",
            "reader_failures",
            "per_query",
        }
        assert report["config"] == config.to_json()
        assert report["alignment_score"] == 1.0
        # question (3 tokens) + page text (3 tokens); answer is 2 tokens
        assert report["avg_input_tokens"] == pytest.approx(6.0)
        assert report["avg_output_tokens"] == pytest.approx(2.0)
        assert report["scored"] == 4
        assert report["abstentions"] == 0
        assert len(report["per_query"]) == 4

    def test_tolerated_reader_failures_are_recorded(self):
        corpus, queries, run = build_world(10)
        reader = FlakyReader(StubReader.for_queries(queries), {"where is token00"})
        outcome = run_rag(queries, run, reader, StubJudge(), RagConfig(), corpus)
        assert len(outcome.results) == 9
        assert len(outcome.reader_failures) == 1
        assert outcome.reader_failures[0]["query_id"] == "q00"
        assert "ReaderError" in outcome.reader_failures[0]["error"]

    def test_excess_reader_failures_abort(self):
        corpus, queries, run = build_world(10)
        reader = FlakyReader(
            StubReader.for_queries(queries), {"where is token00", "where is token01"}
        )
        with pytest.raises(RunAborted):
            run_rag(queries, run, reader, StubJudge(), RagConfig(), corpus)

    def test_all_abstained_reports_null_alignment(self):
        corpus, queries, run = build_world(3)
        config = RagConfig(mode="oracle")
        outcome = run_rag(
            queries, run, StubReader.for_queries(queries), ScriptedJudge(["fail"]), config, corpus
        )
        report = qa_report(outcome, config)
        assert report["alignment_score"] is None
        assert report["abstentions"] == 3
        assert report["scored"] == 0


class TestHttpClients:
    def test_reader_requires_url(self, monkeypatch):
        monkeypatch.delenv("PAGESEARCH_READER_URL", raising=False)
        with pytest.raises(ReaderError):
            HttpReader()

    def test_judge_requires_url(self, monkeypatch):
        monkeypatch.delenv("PAGESEARCH_JUDGE_URL", raising=False)
        with pytest.raises(JudgeError):
            HttpJudge()
