"""Command-line client: argument handling, exit codes, and output rendering.

Every invocation here runs the service in-process (no --server), so these
tests cover the full request/response path end to end.
"""

import json

import pytest

from pagesearch.cli import build_parser, main


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def ingest_argv(planted_files, store_dir) -> list[str]:
    argv = [
        "ingest",
        "--store",
        str(store_dir),
        "--corpus",
        str(planted_files.corpus),
        "--queries",
        str(planted_files.queries),
    ]
    for cid, path in sorted(planted_files.page_embeddings.items()):
        argv += ["--embeddings", f"{cid}={path}"]
    for cid, path in sorted(planted_files.query_embeddings.items()):
        argv += ["--query-embeddings", f"{cid}={path}"]
    return argv


class TestIngestCommand:
    def test_ingest_prints_manifest(self, planted_files, tmp_path, capsys):
        code, out, err = run_cli(ingest_argv(planted_files, tmp_path / "store"), capsys)
        assert code == 0, err
        manifest = json.loads(out)
        assert manifest["page_count"] == 20
        assert manifest["query_count"] == 10

    def test_duplicate_page_id_exits_3(self, tmp_path, capsys):
        rec = {"doc_id": "d0", "page_id": "p0", "page_index": 0, "text": "hello"}
        dup = tmp_path / "dup.jsonl"
        dup.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
        code, out, err = run_cli(
            ["ingest", "--store", str(tmp_path / "s"), "--corpus", str(dup)], capsys
        )
        assert code == 3
        assert err.startswith("DuplicateId:")

    def test_malformed_channel_spec_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["ingest", "--store", "s", "--corpus", "c", "--embeddings", "no-equals"])
        assert exc.value.code == 2


class TestSearchCommand:
    def test_bm25_free_text(self, planted_store, capsys):
        code, out, err = run_cli(
            ["search", "--store", str(planted_store), "--query", "where is token00", "--k", "3"],
            capsys,
        )
        assert code == 0, err
        payload = json.loads(out)
        assert payload["retriever"] == "bm25"
        assert payload["hits"][0]["page_id"] == "d0_p0"

    def test_muvera_ef_below_k_exits_2(self, planted_store, capsys):
        code, out, err = run_cli(
            [
                "search",
                "--store",
                str(planted_store),
                "--retriever",
                "muvera",
                "--query-id",
                "q00",
                "--ef",
                "2",
                "--k",
                "3",
            ],
            capsys,
        )
        assert code == 2
        assert "InvalidParams: ef (2) must be >= k (3)" in err

    def test_unknown_query_id_exits_3(self, planted_store, capsys):
        code, out, err = run_cli(
            ["search", "--store", str(planted_store), "--retriever", "dense", "--query-id", "zz"],
            capsys,
        )
        assert code == 3
        assert err.startswith("UnknownPage:")

    def test_missing_channel_exits_3(self, planted_store, capsys):
        code, out, err = run_cli(
            [
                "search",
                "--store",
                str(planted_store),
                "--retriever",
                "dense",
                "--channel",
                "dense_image",
                "--query-id",
                "q00",
            ],
            capsys,
        )
        assert code == 3
        assert err.startswith("ChannelNotFound:")

    def test_query_and_query_id_are_exclusive(self):
        with pytest.raises(SystemExit) as exc:
            main(
                [
                    "search",
                    "--store",
                    "s",
                    "--query",
                    "text",
                    "--query-id",
                    "q00",
                ]
            )
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            main(["search", "--store", "s"])
        assert exc.value.code == 2

    def test_bad_retriever_choice_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["search", "--store", "s", "--retriever", "splade", "--query", "x"])
        assert exc.value.code == 2

    def test_explain_payload(self, planted_store, capsys):
        code, out, err = run_cli(
            [
                "search",
                "--store",
                str(planted_store),
                "--retriever",
                "multimodal",
                "--query-id",
                "q01",
                "--k",
                "3",
                "--explain",
            ],
            capsys,
        )
        assert code == 0, err
        payload = json.loads(out)
        for hit in payload["hits"]:
            total = sum(payload["explain"][hit["page_id"]].values())
            assert total == pytest.approx(hit["score"], abs=1e-9)


class TestIndexCommand:
    def test_fde_build(self, planted_files, tmp_path, capsys):
        store = tmp_path / "store"
        run_cli(ingest_argv(planted_files, store), capsys)
        code, out, err = run_cli(
            ["index", "--store", str(store), "--kind", "fde", "--channel", "multivector_image"],
            capsys,
        )
        assert code == 0, err
        payload = json.loads(out)
        assert payload["fde_dim"] == 2560
        assert payload["pages"] == 20


class TestBenchmarkCommand:
    def test_full_run_and_rerun_identical(self, planted_store, tmp_path, capsys):
        out_a = tmp_path / "a"
        code, out, err = run_cli(
            ["benchmark", "--store", str(planted_store), "--out", str(out_a)], capsys
        )
        assert code == 0, err
        summary = json.loads(out)
        assert summary["retrievers"]["bm25"]["1"] == 1.0
        assert summary["complementarity"]["both"] == 10
        assert (out_a / "sweep.md").exists()

        out_b = tmp_path / "b"
        run_cli(["benchmark", "--store", str(planted_store), "--out", str(out_b)], capsys)
        for name in ("report.muvera.json", "sweep.json", "benchmark.md"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


class TestRagCommand:
    def test_oracle_stub_run(self, planted_store, tmp_path, capsys):
        out_path = tmp_path / "qa_report.json"
        code, out, err = run_cli(
            [
                "rag",
                "--store",
                str(planted_store),
                "--mode",
                "oracle",
                "--out",
                str(out_path),
            ],
            capsys,
        )
        assert code == 0, err
        payload = json.loads(out)
        assert payload["alignment_score"] == 1.0
        assert json.loads(out_path.read_text()) == payload

    def test_http_reader_unconfigured_exits_4(self, planted_store, capsys, monkeypatch):
        monkeypatch.delenv("PAGESEARCH_READER_URL", raising=False)
        code, out, err = run_cli(
            ["rag", "--store", str(planted_store), "--mode", "oracle", "--reader", "http"],
            capsys,
        )
        assert code == 4
        assert err.startswith("ReaderError:")


class TestReportCommand:
    def test_markdown_document_is_raw(self, planted_store, tmp_path, capsys):
        out = tmp_path / "bench"
        run_cli(
            [
                "benchmark",
                "--store",
                str(planted_store),
                "--out",
                str(out),
                "--retrievers",
                "bm25",
            ],
            capsys,
        )
        code, doc, err = run_cli(
            ["report", "--in", str(out / "report.bm25.json")], capsys
        )
        assert code == 0, err
        assert doc.startswith("## bm25")
        assert "| K | Recall@K |" in doc

    def test_json_format(self, planted_store, tmp_path, capsys):
        out = tmp_path / "bench"
        run_cli(
            [
                "benchmark",
                "--store",
                str(planted_store),
                "--out",
                str(out),
                "--retrievers",
                "bm25",
            ],
            capsys,
        )
        code, doc, err = run_cli(
            ["report", "--in", str(out / "report.bm25.json"), "--format", "json"], capsys
        )
        assert code == 0, err
        assert "reports" in json.loads(doc)


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_parser_builds(self):
        parser = build_parser()
        args = parser.parse_args(
            ["search", "--store", "s", "--query", "x", "--strategy", "rrf", "--rrf-k", "10"]
        )
        assert args.rrf_k == 10
        assert args.command == "search"
