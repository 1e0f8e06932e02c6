"""Workload generation and the experiment runner.

A spec file is flat ``key=value`` text (``#`` starts a comment). Results are
CSV with a fixed column order; see ``CSV_COLUMNS``. Only the columns in
``TIME_COLUMNS`` depend on the machine, everything else is reproducible
bit-for-bit from the spec and its seeds.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import random
import statistics
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Dict, List, Sequence

from .baselines import aub_kfn, brute_force, build_strtree, ier
from .coltree import ColTree, build_coltree
from .distoracle import make_backend
from .graph import RoadGraph, approximate_diameter
from .query import QueryStats, aknn, kfn, knn, range_query
from .sultree import build_sultree
from .synthetic import make_graph

KINDS = ("aknn", "knn", "kfn", "range")
METHODS = ("coltree", "brute", "ier", "aub")

CSV_COLUMNS = [
    "method", "kind", "status", "graph", "vertices", "objects", "k", "density", "nq",
    "locality", "agg", "radius", "queries", "mean_time_ms", "median_time_ms",
    "mean_exact_distance_calls", "mean_candidates_retrieved", "mean_nodes_visited",
    "mean_vertices_settled", "sultree_build_s", "index_build_s", "index_bytes", "gamma",
    "checked",
]
TIME_COLUMNS = ("mean_time_ms", "median_time_ms", "sultree_build_s", "index_build_s")


class SpecError(ValueError):
    pass


class OracleMismatch(AssertionError):
    """A sampled query disagreed with the brute-force oracle."""


@dataclass
class ExperimentSpec:
    graph: str = "grid:50x50"
    kind: str = "aknn"
    k: int = 10
    density: float = 0.001
    nq: int = 8
    locality: float = 15.0  # percent of |V|
    agg: str = "max"
    radius: float = 2.5  # percent of the approximate diameter
    object_sets: int = 20
    query_sets: int = 50
    seed: int = 0
    graph_seed: int = 0
    methods: List[str] = field(default_factory=lambda: ["coltree", "brute"])
    backend: str = "table"
    check_fraction: float = 0.05
    workers: int = 1
    b: int = 8
    alpha: int = 1024
    lam: int = 256
    m: int = 2
    m_root: int = 16
    policy: str = "random"

    def validate(self) -> "ExperimentSpec":
        if self.kind not in KINDS:
            raise SpecError(f"unknown kind {self.kind!r}")
        if not 0 < self.density <= 1:
            raise SpecError("density must be in (0, 1]")
        if not 0 < self.locality <= 100:
            raise SpecError("locality must be in (0, 100]")
        if self.k < 1 or self.nq < 1:
            raise SpecError("k and nq must be >= 1")
        if self.object_sets < 1 or self.query_sets < 1:
            raise SpecError("repetitions must be >= 1")
        if not 0 <= self.check_fraction <= 1:
            raise SpecError("check_fraction must be in [0, 1]")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise SpecError(f"unknown methods {bad}")
        if self.agg not in ("sum", "max"):
            raise SpecError(f"unknown aggregate {self.agg!r}")
        return self

    @classmethod
    def parse(cls, text: str) -> "ExperimentSpec":
        types = {f.name: f.type for f in fields(cls)}
        values: Dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip().replace("-", "_"), value.strip()
            if not sep or key not in types:
                raise SpecError(f"line {lineno}: expected a known key=value, got {raw!r}")
            typ = types[key]
            try:
                if key == "methods":
                    values[key] = [m.strip() for m in value.split(",") if m.strip()]
                elif typ == "int":
                    values[key] = int(value)
                elif typ == "float":
                    values[key] = float(value)
                else:
                    values[key] = value.lower() if key in ("kind", "agg") else value
            except ValueError:
                raise SpecError(f"line {lineno}: bad value for {key}: {value!r}") from None
        return cls(**values).validate()

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.parse(fh.read())


def generate_objects(graph: RoadGraph, d: float, seed: int) -> List[int]:
    """``floor(d * |V|)`` distinct vertices drawn uniformly, sorted."""
    if not 0 < d <= 1:
        raise ValueError("density must be in (0, 1]")
    count = math.floor(d * graph.n)
    if count < 1:
        raise ValueError(f"density {d} selects no vertex of a {graph.n}-vertex graph")
    return sorted(random.Random(seed).sample(range(graph.n), count))


def generate_query_set(graph: RoadGraph, nq: int, locality: float, seed: int) -> List[int]:
    """``nq`` vertices sampled from a BFS region of ``ceil(A% |V|)`` vertices."""
    if nq < 1:
        raise ValueError("need at least one query vertex")
    if not 0 < locality <= 100:
        raise ValueError("locality must be in (0, 100]")
    rng = random.Random(seed)
    size = min(graph.n, math.ceil(locality / 100 * graph.n))
    if nq > size:
        raise ValueError(f"{nq} query vertices do not fit a region of {size}")
    if size == graph.n:
        return rng.sample(range(graph.n), nq)
    start = rng.randrange(graph.n)
    seen = {start}
    region = [start]
    frontier = deque([start])
    adj = graph.adj
    while frontier and len(region) < size:
        u = frontier.popleft()
        for v, _ in adj[u]:
            if v not in seen:
                seen.add(v)
                region.append(v)
                frontier.append(v)
                if len(region) == size:
                    break
    return rng.sample(region, nq)


def _sub_seed(*parts) -> int:
    """Stable per-repetition seed (``hash`` is salted per process)."""
    return int.from_bytes(hashlib.blake2b(repr(parts).encode(), digest_size=8).digest(), "little")


@dataclass
class _Tally:
    stats: QueryStats = field(default_factory=QueryStats)
    times: List[float] = field(default_factory=list)
    index_build: float = 0.0
    index_bytes: int = 0
    checked: int = 0
    status: str = "ok"

    def absorb(self, other: "_Tally") -> None:
        self.stats.merge(other.stats)
        self.times.extend(other.times)
        self.index_build += other.index_build
        self.index_bytes = max(self.index_bytes, other.index_bytes)
        self.checked += other.checked
        if other.status != "ok":
            self.status = other.status


class _Workload:
    """Graph, SUL-Tree and backend for one spec, built once per process."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.graph = make_graph(spec.graph, spec.graph_seed)
        t0 = time.perf_counter()
        self.sul = build_sultree(self.graph, b=spec.b, alpha=spec.alpha, m=spec.m,
                                 m_root=spec.m_root, policy=spec.policy, seed=spec.seed,
                                 measure_plain=False)
        self.sul_build = time.perf_counter() - t0
        self.backend = make_backend(spec.backend, self.graph, self.sul)
        share = getattr(self.backend, "share", None)
        self.oracle = share() if share else make_backend(spec.backend, self.graph, self.sul)
        self.diameter = approximate_diameter(self.graph) if spec.kind == "range" else 0
        self.radius = spec.radius / 100 * self.diameter

    def queries(self, oi: int) -> List[List[int]]:
        spec = self.spec
        nq = spec.nq if spec.kind == "aknn" else 1
        return [generate_query_set(self.graph, nq, spec.locality, _sub_seed(spec.seed, "q", oi, qi))
                for qi in range(spec.query_sets)]

    def run_object_set(self, oi: int) -> Dict[str, _Tally]:
        spec = self.spec
        objects = generate_objects(self.graph, spec.density, _sub_seed(spec.seed, "p", oi))
        query_sets = self.queries(oi)
        check_rng = random.Random(_sub_seed(spec.seed, "check", oi))
        check = [check_rng.random() < spec.check_fraction for _ in query_sets]
        out: Dict[str, _Tally] = {}
        for method in spec.methods:
            out[method] = self._run_method(method, objects, query_sets, check)
        return out

    def _run_method(self, method, objects, query_sets, check) -> _Tally:
        spec = self.spec
        tally = _Tally()
        kind = spec.kind
        if (method == "ier" and kind == "kfn") or (method == "aub" and kind != "kfn"):
            tally.status = "unsupported"
            return tally
        run = None
        t0 = time.perf_counter()
        if method == "coltree":
            col = build_coltree(self.sul, objects, lam=spec.lam)
            tally.index_bytes = len(col.to_bytes())
            run = lambda qs: _coltree_query(col, self.backend, kind, qs, spec, self.radius)
        elif method == "ier":
            if not self.graph.has_coordinates:
                tally.status = "unsupported"
                return tally
            rt = build_strtree(objects, self.graph.coords)
            tally.index_bytes = 32 * len(rt.nodes) + 8 * len(objects)
            run = lambda qs: ier(kind, rt, self.graph, self.backend, q=qs[0], queries=qs,
                                 k=spec.k, agg=spec.agg, r=self.radius)
        elif method == "aub":
            run = lambda qs: aub_kfn(objects, self.sul, self.backend, qs[0], spec.k)
        else:
            run = lambda qs: _brute(objects, self.backend, kind, qs, spec, self.radius)
        tally.index_build = time.perf_counter() - t0
        for qs, do_check in zip(query_sets, check):
            t = time.perf_counter()
            res = run(qs)
            tally.times.append(time.perf_counter() - t)
            tally.stats.merge(res.stats)
            if do_check and method != "brute":
                expect = _brute(objects, self.oracle, kind, qs, spec, self.radius)
                if res.objects != expect.objects or (
                        kind != "range" and res.scores != expect.scores):
                    raise OracleMismatch(
                        f"{method} {kind} disagrees with brute force for queries {qs}: "
                        f"{res.items} != {expect.items}")
                tally.checked += 1
        return tally


def _coltree_query(col: ColTree, backend, kind, qs, spec, radius):
    if kind == "aknn":
        return aknn(col, backend, qs, spec.k, spec.agg)
    if kind == "knn":
        return knn(col, backend, qs[0], spec.k)
    if kind == "kfn":
        return kfn(col, backend, qs[0], spec.k)
    return range_query(col, backend, qs[0], radius)


def _brute(objects, backend, kind, qs, spec, radius):
    return brute_force(kind, objects, backend, q=qs[0], queries=qs, k=spec.k, agg=spec.agg,
                       r=radius)


def _worker_run(spec: ExperimentSpec, indices: Sequence[int]):
    work = _Workload(spec)
    merged: Dict[str, _Tally] = {}
    for oi in indices:
        for method, tally in work.run_object_set(oi).items():
            merged.setdefault(method, _Tally()).absorb(tally)
    return merged


def run_experiment(spec: ExperimentSpec) -> List[dict]:
    """Run every method of ``spec`` and return one CSV row per method.

    Raises ``OracleMismatch`` if a sampled query disagrees with brute force.
    """
    spec.validate()
    work = _Workload(spec)
    indices = list(range(spec.object_sets))
    tallies: Dict[str, _Tally] = {m: _Tally() for m in spec.methods}
    if spec.workers > 1:
        shards = [indices[i::spec.workers] for i in range(spec.workers)]
        with ProcessPoolExecutor(spec.workers) as pool:
            for part in pool.map(_worker_run, [spec] * len(shards), shards):
                for method, tally in part.items():
                    tallies[method].absorb(tally)
    else:
        for oi in indices:
            for method, tally in work.run_object_set(oi).items():
                tallies[method].absorb(tally)

    gamma = work.sul.gamma()["gamma"]
    n_objects = math.floor(spec.density * work.graph.n)
    rows = []
    for method in spec.methods:
        t = tallies[method]
        nq = len(t.times)
        mean = (lambda x: x / nq) if nq else (lambda x: 0)
        s = t.stats
        rows.append({
            "method": method, "kind": spec.kind, "status": t.status, "graph": spec.graph,
            "vertices": work.graph.n, "objects": n_objects, "k": spec.k,
            "density": spec.density, "nq": spec.nq if spec.kind == "aknn" else 1,
            "locality": spec.locality, "agg": spec.agg if spec.kind == "aknn" else "",
            "radius": round(work.radius, 6) if spec.kind == "range" else "",
            "queries": nq,
            "mean_time_ms": round(1000 * statistics.fmean(t.times), 6) if nq else "",
            "median_time_ms": round(1000 * statistics.median(t.times), 6) if nq else "",
            "mean_exact_distance_calls": round(mean(s.exact_distance_calls), 6),
            "mean_candidates_retrieved": round(mean(s.candidates_retrieved), 6),
            "mean_nodes_visited": round(mean(s.nodes_visited), 6),
            "mean_vertices_settled": round(mean(s.vertices_settled), 6),
            "sultree_build_s": round(work.sul_build, 6),
            "index_build_s": round(t.index_build, 6),
            "index_bytes": t.index_bytes if method in ("coltree", "ier") else (
                len(work.sul.to_bytes()) if method == "aub" else 0),
            "gamma": round(gamma, 6),
            "checked": t.checked,
        })
    return rows


def rows_to_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def strip_time_columns(text: str) -> List[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for col in TIME_COLUMNS:
            row.pop(col, None)
    return rows
