"""Command-line client for the retrieval service.

All subcommands are thin HTTP shims: they build one request, send it to the
service, and print the JSON (or markdown) response. By default the request is
served in-process over an ASGI transport, so no daemon is needed; pass
``--server http://host:port`` to talk to a running instance instead.

Exit codes: 0 success, 2 usage error, 3 data error, 4 external service error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from . import __version__
from .errors import SERVICE, USAGE, error_by_name

_IN_PROCESS_BASE = "http://pagesearch.internal"


def _channel_spec(value: str) -> dict:
    if "=" not in value:
        raise argparse.ArgumentTypeError(f"expected CHANNEL=PATH, got {value!r}")
    channel_id, path = value.split("=", 1)
    return {"channel_id": channel_id, "path": path}


def _add_fde_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ksim", type=int, default=4, help="SimHash bits per repetition")
    p.add_argument("--dproj", type=int, default=16, help="projected dim per bucket")
    p.add_argument("--reps", type=int, default=10, help="independent repetitions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--identity-projection",
        action="store_true",
        help="skip the random projection (requires dproj == channel dim)",
    )


def _fde_body(args: argparse.Namespace) -> dict:
    return {
        "k_sim": args.ksim,
        "d_proj": args.dproj,
        "repetitions": args.reps,
        "seed": args.seed,
        "identity_projection": args.identity_projection,
    }


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["rsf", "rrf"], default="rsf")
    p.add_argument("--alpha", type=float, default=0.5, help="image weight in [0, 1]")
    p.add_argument("--rrf-k", type=int, default=60, dest="rrf_k")
    p.add_argument("--pool", type=int, default=None, help="candidate pool per source")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagesearch",
        description="Page-level retrieval over precomputed embeddings.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--server",
        default=None,
        help="service URL; omitted = run the service in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a store from corpus/query/embedding files")
    p.add_argument("--store", required=True)
    p.add_argument("--corpus", required=True, help="corpus .jsonl path")
    p.add_argument("--queries", default=None, help="queries .jsonl path")
    p.add_argument(
        "--embeddings",
        type=_channel_spec,
        action="append",
        default=[],
        metavar="CHANNEL=PATH",
        help="page-side embedding file (repeatable)",
    )
    p.add_argument(
        "--query-embeddings",
        type=_channel_spec,
        action="append",
        default=[],
        metavar="CHANNEL=PATH",
        dest="query_embeddings",
        help="query-side embedding file (repeatable)",
    )
    p.add_argument(
        "--normalize",
        action="append",
        default=[],
        metavar="CHANNEL",
        help="L2-normalize this channel at ingest (repeatable)",
    )

    p = sub.add_parser("index", help="build and persist an index")
    p.add_argument("--store", required=True)
    p.add_argument("--kind", required=True, choices=["bm25", "dense", "graph", "fde"])
    p.add_argument("--channel", default=None)
    p.add_argument("--metric", choices=["dot", "cosine"], default=None)
    _add_fde_flags(p)
    p.add_argument("--m", type=int, default=16, dest="graph_m", help="graph degree bound")
    p.add_argument("--efc", type=int, default=128, help="graph construction beam width")

    p = sub.add_parser("search", help="run one query against a store")
    p.add_argument("--store", required=True)
    p.add_argument(
        "--retriever",
        default="bm25",
        choices=["bm25", "dense", "maxsim", "muvera", "hybrid_text", "multimodal"],
    )
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--query", default=None, help="free-text query")
    q.add_argument("--query-id", default=None, dest="query_id", help="query id with stored embeddings")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--ef", type=int, default=160, help="first-stage candidate count")
    p.add_argument("--channel", default=None)
    p.add_argument("--metric", choices=["dot", "cosine"], default=None)
    _add_fusion_flags(p)
    p.add_argument("--image-retriever", choices=["maxsim", "muvera"], default="maxsim", dest="image_retriever")
    _add_fde_flags(p)
    p.add_argument("--graph", action="store_true", help="use the graph index for stage 1")
    p.add_argument("--explain", action="store_true", help="include per-source fusion contributions")

    p = sub.add_parser("benchmark", help="evaluate retrievers and write report files")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--retrievers", nargs="+", default=None)
    p.add_argument("--ks", nargs="+", type=int, default=[1, 5, 20])
    p.add_argument(
        "--alphas",
        nargs="+",
        type=float,
        default=[round(i / 10, 1) for i in range(11)],
        help="alpha grid for the multimodal sweep",
    )
    p.add_argument("--strategies", nargs="+", choices=["rsf", "rrf"], default=["rsf", "rrf"])
    p.add_argument("--ef", type=int, default=160)
    _add_fusion_flags(p)
    p.add_argument("--image-retriever", choices=["maxsim", "muvera"], default="maxsim", dest="image_retriever")
    _add_fde_flags(p)
    p.add_argument("--graph", action="store_true")
    p.add_argument("--doc-level", action="store_true", dest="doc_level")
    p.add_argument("--complementarity-k", type=int, default=1, dest="complementarity_k")
    p.add_argument(
        "--timestamps",
        action="store_true",
        help="stamp wall-clock metadata into report meta fields",
    )

    p = sub.add_parser("rag", help="retrieval-augmented QA over stored queries")
    p.add_argument("--store", required=True)
    p.add_argument("--out", default=None, help="write qa_report.json here")
    p.add_argument("--modality", choices=["text", "image"], default="text")
    p.add_argument("--k", type=int, default=1, help="pages of context")
    p.add_argument(
        "--mode",
        choices=["standard", "no_retrieval", "hard_negative", "oracle"],
        default="standard",
    )
    p.add_argument("--votes", type=int, default=3, help="judge votes per query (odd)")
    p.add_argument("--strict-hard-negative", action="store_true", dest="strict_hard_negative")
    p.add_argument("--jobs", type=int, default=4, help="concurrent reader/judge calls")
    p.add_argument("--image-root", default=None, dest="image_root")
    p.add_argument("--reader", choices=["stub", "http"], default="stub")
    p.add_argument("--judge", choices=["stub", "http"], default="stub")
    p.add_argument("--retriever", default=None)
    p.add_argument("--ef", type=int, default=160)
    p.add_argument("--strategy", choices=["rsf", "rrf"], default="rsf")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--channel", default=None)

    p = sub.add_parser("report", help="render stored report JSON as markdown or json")
    p.add_argument("--in", required=True, dest="path", help="report .json path")
    p.add_argument("--format", choices=["markdown", "json"], default="markdown")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)

    return parser


def _build_request(args: argparse.Namespace) -> tuple[str, str, dict | None]:
    """Map parsed args to (method, path, json_body)."""
    if args.command == "ingest":
        return "POST", "/ingest", {
            "store_dir": args.store,
            "corpus_path": args.corpus,
            "queries_path": args.queries,
            "embeddings": args.embeddings,
            "query_embeddings": args.query_embeddings,
            "normalize": args.normalize,
        }
    if args.command == "index":
        return "POST", "/index", {
            "store_dir": args.store,
            "kind": args.kind,
            "channel": args.channel,
            "metric": args.metric,
            "fde": _fde_body(args),
            "graph": {"M": args.graph_m, "ef_construction": args.efc, "seed": args.seed},
        }
    if args.command == "search":
        return "POST", "/search", {
            "store_dir": args.store,
            "retriever": args.retriever,
            "query_text": args.query,
            "query_id": args.query_id,
            "k": args.k,
            "ef": args.ef,
            "channel": args.channel,
            "metric": args.metric,
            "strategy": args.strategy,
            "alpha": args.alpha,
            "rrf_k": args.rrf_k,
            "pool": args.pool,
            "image_retriever": args.image_retriever,
            "fde": _fde_body(args),
            "use_graph": args.graph,
            "explain": args.explain,
        }
    if args.command == "benchmark":
        return "POST", "/benchmark", {
            "store_dir": args.store,
            "out_dir": args.out,
            "retrievers": args.retrievers,
            "ks": args.ks,
            "alpha_grid": args.alphas,
            "strategies": args.strategies,
            "ef": args.ef,
            "alpha": args.alpha,
            "strategy": args.strategy,
            "rrf_k": args.rrf_k,
            "pool": args.pool,
            "image_retriever": args.image_retriever,
            "fde": _fde_body(args),
            "use_graph": args.graph,
            "doc_level": args.doc_level,
            "complementarity_k": args.complementarity_k,
            "timestamps": args.timestamps,
        }
    if args.command == "rag":
        return "POST", "/rag", {
            "store_dir": args.store,
            "out_path": args.out,
            "modality": args.modality,
            "k": args.k,
            "mode": args.mode,
            "judge_votes": args.votes,
            "strict_hard_negative": args.strict_hard_negative,
            "jobs": args.jobs,
            "image_root": args.image_root,
            "reader": args.reader,
            "judge": args.judge,
            "retriever": args.retriever,
            "ef": args.ef,
            "strategy": args.strategy,
            "alpha": args.alpha,
            "channel": args.channel,
        }
    if args.command == "report":
        return "POST", "/report", {"path": args.path, "format": args.format}
    raise AssertionError(f"unhandled command {args.command}")


def _send(server: str | None, method: str, path: str, body: dict | None) -> httpx.Response:
    if server is not None:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            return client.request(method, path, json=body)

    async def _in_process() -> httpx.Response:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url=_IN_PROCESS_BASE, timeout=600.0
        ) as client:
            return await client.request(method, path, json=body)

    return asyncio.run(_in_process())


def _render(args: argparse.Namespace, payload: dict) -> str:
    if args.command == "report":
        return payload["document"]
    return json.dumps(payload, indent=2, sort_keys=True)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    method, path, body = _build_request(args)
    try:
        resp = _send(args.server, method, path, body)
    except httpx.HTTPError as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        return SERVICE

    try:
        payload = resp.json()
    except ValueError:
        print(f"malformed response (HTTP {resp.status_code})", file=sys.stderr)
        return SERVICE

    if resp.status_code >= 400:
        if isinstance(payload, dict) and "error" in payload:
            print(f"{payload['error']}: {payload.get('detail', '')}", file=sys.stderr)
            return error_by_name(payload["error"]).exit_code
        # no engine error name: request never reached the engine (bad body)
        print(json.dumps(payload, indent=2, sort_keys=True), file=sys.stderr)
        return USAGE if resp.status_code < 500 else SERVICE

    print(_render(args, payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
