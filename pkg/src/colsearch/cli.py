"""Command line front end.

Every subcommand runs in-process on files. ``serve`` starts the HTTP service
and ``query --server`` sends a query to one instead of loading indexes
locally.

Exit codes: 0 success, 1 usage or input error, 2 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional

from .graph import UnsupportedOperation

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_ids(path: str) -> List[int]:
    from .coltree import read_objects

    with open(path) as fh:
        return read_objects(fh)


def cmd_ingest(args) -> int:
    from .graph import write_id_map
    from .io import ingest_dimacs

    g = ingest_dimacs(args.gr, args.co)
    g.save(args.out)
    if args.id_map:
        with open(args.id_map, "w") as fh:
            write_id_map(g, fh)
    print(f"{g.n} vertices, {g.edge_count} edges -> {args.out}")
    return EXIT_OK


def cmd_build_sultree(args) -> int:
    from .sultree import build_sultree
    from .synthetic import make_graph

    g = make_graph(args.graph, args.graph_seed)
    t0 = time.perf_counter()
    st = build_sultree(g, b=args.b, alpha=args.alpha, m=args.m, m_root=args.m_root,
                       policy=args.policy, seed=args.seed)
    elapsed = time.perf_counter() - t0
    st.save(args.out)
    gamma = st.gamma().get("gamma", 0.0)
    print(f"{len(st.nodes)} nodes, depth {st.depth()}, {len(st.store)} list entries, "
          f"gamma {gamma:.3f}, {elapsed:.2f}s -> {args.out}")
    return EXIT_OK


def cmd_build_coltree(args) -> int:
    from .coltree import build_coltree
    from .sultree import SulTree

    st = SulTree.load(args.sultree)
    objects = _read_ids(args.objects)
    _check_ids(objects, st.n, "object")
    t0 = time.perf_counter()
    col = build_coltree(st, objects, lam=args.lam)
    elapsed = time.perf_counter() - t0
    col.save(args.out)
    print(f"{col.object_count} objects, {len(col.nodes)} nodes, {elapsed:.3f}s -> {args.out}")
    return EXIT_OK


def cmd_gen_objects(args) -> int:
    from .bench import generate_objects
    from .coltree import write_objects
    from .synthetic import make_graph

    g = make_graph(args.graph, args.graph_seed)
    objects = generate_objects(g, args.density, args.seed)
    if args.out == "-":
        write_objects(objects, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            write_objects(objects, fh)
        print(f"{len(objects)} objects -> {args.out}")
    return EXIT_OK


def _check_ids(ids, n, what):
    bad = [v for v in ids if not 0 <= v < n]
    if bad:
        raise UsageError(f"{what} id {bad[0]} out of range for {n} vertices")


def _print_result(kind, method, items, stats, verified, as_json):
    if as_json:
        print(json.dumps({"kind": kind, "method": method, "items": items, "stats": stats,
                          "verified": verified}))
        return
    for obj, score in items:
        print(f"{obj}\t{'' if score is None else score}")
    keys = ("exact_distance_calls", "candidates_retrieved", "nodes_visited", "wall_time")
    print("# " + " ".join(f"{k}={stats[k]}" for k in keys if k in stats), file=sys.stderr)
    if verified is not None:
        print(f"# verified={verified}", file=sys.stderr)


def _read_query_file(path: str) -> List[int]:
    with open(path) as fh:
        tokens = " ".join(line.split("#", 1)[0] for line in fh).split()
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise UsageError(f"bad query vertex in {path}: {exc}") from None


def cmd_query(args) -> int:
    queries = _read_query_file(args.q_file)
    if not queries:
        raise UsageError("query file holds no vertex")
    if args.kind == "range" and args.radius is None:
        raise UsageError("range needs --radius")
    if args.server:
        return _remote_query(args, queries)

    from .coltree import ColTree, build_coltree
    from .distoracle import make_backend
    from .service import QueryRequest, results_agree, run_query
    from .sultree import SulTree
    from .synthetic import make_graph

    if not args.sultree or not args.graph:
        raise UsageError("local queries need --graph and --sultree")
    if not args.objects and not args.coltree:
        raise UsageError("give --objects or --coltree")
    g = make_graph(args.graph, args.graph_seed)
    st = SulTree.load(args.sultree)
    st.attach(g)
    _check_ids(queries, g.n, "query vertex")
    if args.coltree:
        col = ColTree.load(args.coltree, st)
    else:
        objects = _read_ids(args.objects)
        _check_ids(objects, g.n, "object")
        col = build_coltree(st, objects, lam=args.lam)
    req = QueryRequest(coltree="-", queries=queries, k=args.k, agg=args.agg, radius=args.radius,
                       method=args.method, backend=args.backend)
    backend = make_backend(args.backend, g, st)
    res = run_query(args.kind, col, g, backend, req)
    verified = None
    if args.verify:
        expect = run_query(args.kind, col, g, backend, req.model_copy(update={"method": "brute"}))
        verified = results_agree(args.kind, res, expect)
    _print_result(args.kind, args.method, res.items, res.stats.as_dict(), verified, args.json)
    return EXIT_MISMATCH if verified is False else EXIT_OK


def _remote_query(args, queries) -> int:
    import httpx

    if not args.name:
        raise UsageError("--server needs --name (the COL-Tree name on the server)")
    body = {"coltree": args.name, "queries": queries, "k": args.k, "agg": args.agg,
            "radius": args.radius, "method": args.method, "backend": args.backend,
            "verify": args.verify}
    resp = httpx.post(f"{args.server.rstrip('/')}/query/{args.kind}", json=body, timeout=None)
    if resp.status_code != 200:
        raise UsageError(f"server answered {resp.status_code}: {resp.text}")
    data = resp.json()
    items = [tuple(it) for it in data["items"]]
    _print_result(args.kind, data["method"], items, data["stats"], data["verified"], args.json)
    return EXIT_MISMATCH if data["verified"] is False else EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ExperimentSpec, OracleMismatch, rows_to_csv, run_experiment

    spec = ExperimentSpec.from_file(args.spec)
    if args.workers:
        spec.workers = args.workers
    try:
        rows = run_experiment(spec)
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level=args.log_level)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="colsearch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def graph_args(sp, required=True):
        sp.add_argument("--graph", required=required,
                        help="graph file (.npz or .gr) or grid:WxH / planar:N")
        sp.add_argument("--graph-seed", type=int, default=0,
                        help="seed for synthetic graph specs")

    sp = sub.add_parser("ingest", help="DIMACS .gr (+ .co) to a normalized binary graph")
    sp.add_argument("gr")
    sp.add_argument("--co")
    sp.add_argument("--out", required=True)
    sp.add_argument("--id-map", help="write the original-to-dense id mapping here")
    sp.set_defaults(fn=cmd_ingest)

    sp = sub.add_parser("build-sultree", help="build and save a SUL-Tree")
    graph_args(sp)
    sp.add_argument("--b", type=int, default=8)
    sp.add_argument("--alpha", type=int, default=1024)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--m-root", type=int, default=16)
    sp.add_argument("--policy", default="random")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_build_sultree)

    sp = sub.add_parser("build-coltree", help="build and save a COL-Tree over an object file")
    sp.add_argument("--sultree", required=True)
    sp.add_argument("--objects", required=True)
    sp.add_argument("--lam", type=int, default=256)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_build_coltree)

    sp = sub.add_parser("gen-objects", help="sample a uniform object set")
    graph_args(sp)
    sp.add_argument("--density", type=float, default=0.001)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_gen_objects)

    sp = sub.add_parser("query", help="run one query")
    sp.add_argument("kind", choices=["aknn", "kfn", "range", "knn"])
    graph_args(sp, required=False)
    sp.add_argument("--sultree")
    sp.add_argument("--objects")
    sp.add_argument("--coltree")
    sp.add_argument("--lam", type=int, default=256)
    sp.add_argument("--q-file", required=True, help="query vertex ids, whitespace separated")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--agg", choices=["sum", "max"], default="max")
    sp.add_argument("--radius", type=float, help="range radius in weight units")
    sp.add_argument("--method", choices=["coltree", "brute", "ier", "aub"], default="coltree")
    sp.add_argument("--backend", default="bidijkstra",
                    choices=["bidijkstra", "alt", "sssp-cache", "table"])
    sp.add_argument("--verify", action="store_true", help="cross-check against brute force")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--server", help="base URL of a running service")
    sp.add_argument("--name", help="COL-Tree name on the server")
    sp.set_defaults(fn=cmd_query)

    sp = sub.add_parser("bench", help="run an experiment spec, write CSV")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("serve", help="start the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--log-level", default="info")
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "k", 1) is not None and getattr(args, "k", 1) < 1:
        print("colsearch: error: --k must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"colsearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, UnsupportedOperation) as exc:
        print(f"colsearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
