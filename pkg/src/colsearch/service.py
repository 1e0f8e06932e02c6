"""HTTP service keeping graphs and indexes resident between requests.

Building a SUL-Tree is the expensive step; a long-running process lets many
clients query the same indexes. Everything is addressed by a caller-chosen
name. The registry is guarded by one lock because distance backends keep
mutable counters.
"""

from __future__ import annotations

import threading
from typing import Dict, List, Literal, Optional, Tuple, Union

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from . import __version__
from .baselines import aub_kfn, brute_force, build_strtree, ier
from .bench import ExperimentSpec, OracleMismatch, SpecError, rows_to_csv, run_experiment
from .coltree import ColTree, build_coltree
from .distoracle import make_backend
from .graph import RoadGraph, UnsupportedOperation
from .query import aknn, kfn, knn, range_query
from .sultree import SulTree, build_sultree
from .synthetic import make_graph

Kind = Literal["aknn", "knn", "kfn", "range"]
Method = Literal["coltree", "brute", "ier", "aub"]


class GraphRequest(BaseModel):
    name: str
    source: str = Field(description="grid:WxH, planar:N, or a .npz/.gr path")
    seed: int = 0


class GraphInfo(BaseModel):
    name: str
    vertices: int
    edges: int
    has_coordinates: bool


class SulTreeRequest(BaseModel):
    name: str
    graph: str
    path: Optional[str] = None  # load instead of building
    b: int = 8
    alpha: int = 1024
    m: int = 2
    m_root: int = 16
    policy: str = "random"
    seed: int = 0


class SulTreeInfo(BaseModel):
    name: str
    graph: str
    nodes: int
    depth: int
    store_entries: int
    gamma: Optional[float] = None
    checksum: str


class ColTreeRequest(BaseModel):
    name: str
    sultree: str
    objects: List[int] = Field(default_factory=list)
    path: Optional[str] = None
    lam: int = 256


class ColTreeInfo(BaseModel):
    name: str
    sultree: str
    objects: int
    nodes: int
    depth: int


class QueryRequest(BaseModel):
    coltree: str
    queries: List[int] = Field(min_length=1)
    k: int = Field(10, ge=1)
    agg: Literal["sum", "max"] = "max"
    radius: Optional[float] = Field(None, ge=0)
    method: Method = "coltree"
    backend: str = "bidijkstra"
    verify: bool = False


class QueryResult(BaseModel):
    kind: Kind
    method: Method
    items: List[Tuple[int, Optional[Union[int, float]]]]
    stats: Dict[str, Union[int, float]]
    verified: Optional[bool] = None


class BenchRequest(BaseModel):
    spec: str = Field(description="flat key=value experiment spec")


class Registry:
    def __init__(self):
        self.lock = threading.RLock()
        self.graphs: Dict[str, RoadGraph] = {}
        self.sultrees: Dict[str, Tuple[str, SulTree]] = {}
        self.coltrees: Dict[str, Tuple[str, ColTree]] = {}
        self.backends: Dict[Tuple[str, str], object] = {}

    def graph(self, name):
        try:
            return self.graphs[name]
        except KeyError:
            raise HTTPException(404, f"no graph named {name!r}") from None

    def sultree(self, name):
        try:
            return self.sultrees[name]
        except KeyError:
            raise HTTPException(404, f"no SUL-Tree named {name!r}") from None

    def coltree(self, name):
        try:
            return self.coltrees[name]
        except KeyError:
            raise HTTPException(404, f"no COL-Tree named {name!r}") from None

    def backend(self, graph_name: str, sul_name: str, kind: str):
        key = (sul_name, kind)
        be = self.backends.get(key)
        if be is None:
            be = make_backend(kind, self.graph(graph_name), self.sultree(sul_name)[1])
            self.backends[key] = be
        return be


def run_query(kind: str, col: ColTree, graph: RoadGraph, backend, req: QueryRequest):
    """Dispatch one query; shared by the service and the local CLI."""
    qs = req.queries
    if kind != "aknn" and len(qs) != 1:
        raise ValueError(f"{kind} takes exactly one query vertex")
    if kind == "range" and req.radius is None:
        raise ValueError("range needs a radius")
    objects = col.all_objects()
    if req.method == "coltree":
        if kind == "aknn":
            return aknn(col, backend, qs, req.k, req.agg)
        if kind == "knn":
            return knn(col, backend, qs[0], req.k)
        if kind == "kfn":
            return kfn(col, backend, qs[0], req.k)
        return range_query(col, backend, qs[0], req.radius)
    if req.method == "brute":
        return brute_force(kind, objects, backend, q=qs[0], queries=qs, k=req.k, agg=req.agg,
                           r=req.radius)
    if req.method == "aub":
        if kind != "kfn":
            raise UnsupportedOperation("aub answers kfn only")
        return aub_kfn(objects, col.sul, backend, qs[0], req.k)
    rt = build_strtree(objects, graph.coords) if graph.has_coordinates else None
    if rt is None:
        raise UnsupportedOperation("ier needs vertex coordinates")
    return ier(kind, rt, graph, backend, q=qs[0], queries=qs, k=req.k, agg=req.agg, r=req.radius)


def results_agree(kind: str, got, expect) -> bool:
    if kind == "range":
        return got.objects == expect.objects
    return got.items == expect.items


def create_app(registry: Optional[Registry] = None) -> FastAPI:
    reg = registry or Registry()
    app = FastAPI(title="colsearch", version=__version__)
    app.state.registry = reg

    @app.get("/health")
    def health():
        return {"status": "ok", "graphs": len(reg.graphs), "sultrees": len(reg.sultrees),
                "coltrees": len(reg.coltrees)}

    @app.post("/graphs", response_model=GraphInfo)
    def add_graph(req: GraphRequest):
        try:
            g = make_graph(req.source, req.seed)
        except (OSError, ValueError) as exc:
            raise HTTPException(400, str(exc)) from None
        with reg.lock:
            reg.graphs[req.name] = g
        return GraphInfo(name=req.name, vertices=g.n, edges=g.edge_count,
                         has_coordinates=g.has_coordinates)

    @app.post("/sultrees", response_model=SulTreeInfo)
    def add_sultree(req: SulTreeRequest):
        with reg.lock:
            g = reg.graph(req.graph)
            try:
                if req.path:
                    st = SulTree.load(req.path)
                    if st.n != g.n:
                        raise ValueError("index does not match the graph")
                    st.attach(g)
                else:
                    st = build_sultree(g, b=req.b, alpha=req.alpha, m=req.m, m_root=req.m_root,
                                       policy=req.policy, seed=req.seed)
            except (OSError, ValueError) as exc:
                raise HTTPException(400, str(exc)) from None
            reg.sultrees[req.name] = (req.graph, st)
            reg.backends = {k: v for k, v in reg.backends.items() if k[0] != req.name}
        return SulTreeInfo(name=req.name, graph=req.graph, nodes=len(st.nodes), depth=st.depth(),
                           store_entries=len(st.store), gamma=st.gamma().get("gamma"),
                           checksum=st.checksum().hex())

    @app.post("/coltrees", response_model=ColTreeInfo)
    def add_coltree(req: ColTreeRequest):
        with reg.lock:
            _, st = reg.sultree(req.sultree)
            try:
                if req.path:
                    col = ColTree.load(req.path, st)
                else:
                    if any(not 0 <= p < st.n for p in req.objects):
                        raise ValueError("object id out of range")
                    col = build_coltree(st, req.objects, lam=req.lam)
            except (OSError, ValueError) as exc:
                raise HTTPException(400, str(exc)) from None
            reg.coltrees[req.name] = (req.sultree, col)
        return ColTreeInfo(name=req.name, sultree=req.sultree, objects=col.object_count,
                           nodes=len(col.nodes), depth=col.depth())

    @app.post("/query/{kind}", response_model=QueryResult)
    def query(kind: Kind, req: QueryRequest):
        with reg.lock:
            sul_name, col = reg.coltree(req.coltree)
            graph_name, _ = reg.sultree(sul_name)
            graph = reg.graph(graph_name)
            if any(not 0 <= q < graph.n for q in req.queries):
                raise HTTPException(400, "query vertex out of range")
            try:
                backend = reg.backend(graph_name, sul_name, req.backend)
                res = run_query(kind, col, graph, backend, req)
                verified = None
                if req.verify:
                    expect = run_query(kind, col, graph, backend,
                                       req.model_copy(update={"method": "brute"}))
                    verified = results_agree(kind, res, expect)
            except UnsupportedOperation as exc:
                raise HTTPException(422, str(exc)) from None
            except ValueError as exc:
                raise HTTPException(400, str(exc)) from None
        return QueryResult(kind=kind, method=req.method, items=res.items,
                           stats=res.stats.as_dict(), verified=verified)

    @app.post("/bench", response_class=PlainTextResponse)
    def bench(req: BenchRequest):
        try:
            spec = ExperimentSpec.parse(req.spec)
            return rows_to_csv(run_experiment(spec))
        except SpecError as exc:
            raise HTTPException(400, str(exc)) from None
        except OracleMismatch as exc:
            raise HTTPException(409, str(exc)) from None

    return app
