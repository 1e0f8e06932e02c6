"""Road-network graph, DIMACS ingestion and the Dijkstra variants.

Vertices are dense integers ``0..n-1``. Weights are positive integers, so all
distances are exact. Adjacency is held in CSR form (``indptr``/``indices``/
``weights`` numpy arrays); a per-vertex tuple view is cached for the pure
Python search loops.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

INF = math.inf


class GraphFormatError(ValueError):
    """Malformed DIMACS input. The message names the offending line."""


class UnsupportedOperation(RuntimeError):
    pass


class RoadGraph:
    """Undirected weighted graph in CSR form with optional planar coordinates."""

    def __init__(self, indptr, indices, weights, coords=None, id_map=None):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.int64)
        self.coords = None if coords is None else np.asarray(coords, dtype=np.float64)
        # id_map[new] = original (0-based, pre-normalization) id
        self.id_map = None if id_map is None else np.asarray(id_map, dtype=np.int64)
        self._adj = None
        self._max_speed = None

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def vertex_count(self) -> int:
        return self.n

    @property
    def edge_count(self) -> int:
        """Number of undirected edges (each stored twice)."""
        return len(self.indices) // 2

    @property
    def adj(self) -> list:
        if self._adj is None:
            ip = self.indptr.tolist()
            ix = self.indices.tolist()
            wt = self.weights.tolist()
            self._adj = [tuple(zip(ix[ip[u]:ip[u + 1]], wt[ip[u]:ip[u + 1]]))
                         for u in range(self.n)]
        return self._adj

    def neighbors(self, u: int):
        return self.adj[u]

    @property
    def has_coordinates(self) -> bool:
        return self.coords is not None

    @property
    def max_speed(self) -> float:
        if self.coords is None:
            raise UnsupportedOperation("graph has no coordinates")
        if self._max_speed is None:
            self._max_speed = _max_speed(self)
        return self._max_speed

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], coords=None) -> "RoadGraph":
        """Build a symmetric graph from undirected ``(u, v, w)`` triples.

        Parallel edges keep the smallest weight; self-loops are dropped.
        """
        best: dict = {}
        for u, v, w in edges:
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            old = best.get(key)
            if old is None or w < old:
                best[key] = w
        return cls._from_undirected(n, best, coords)

    @classmethod
    def _from_undirected(cls, n, best: dict, coords=None) -> "RoadGraph":
        m = len(best)
        src = np.empty(2 * m, dtype=np.int64)
        dst = np.empty(2 * m, dtype=np.int64)
        wts = np.empty(2 * m, dtype=np.int64)
        if m:
            pairs = np.array(list(best.keys()), dtype=np.int64).reshape(-1, 2)
            ws = np.array(list(best.values()), dtype=np.int64)
            src[:m], dst[:m] = pairs[:, 0], pairs[:, 1]
            src[m:], dst[m:] = pairs[:, 1], pairs[:, 0]
            wts[:m] = wts[m:] = ws
        order = np.lexsort((dst, src))
        src, dst, wts = src[order], dst[order], wts[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(indptr, dst, wts, coords)

    def edges(self):
        """Yield each undirected edge once as ``(u, v, w)`` with ``u < v``."""
        for u, nbrs in enumerate(self.adj):
            for v, w in nbrs:
                if u < v:
                    yield u, v, w

    def permuted(self, order: Sequence[int]) -> "RoadGraph":
        """Relabel vertices so that old vertex ``order[i]`` becomes ``i``."""
        order = np.asarray(order, dtype=np.int64)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        best = {}
        for u, v, w in self.edges():
            a, b = int(rank[u]), int(rank[v])
            best[(a, b) if a < b else (b, a)] = w
        coords = None if self.coords is None else self.coords[order]
        return RoadGraph._from_undirected(self.n, best, coords)

    def same_as(self, other: "RoadGraph") -> bool:
        return (np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights)
                and ((self.coords is None and other.coords is None)
                     or (self.coords is not None and other.coords is not None
                         and np.array_equal(self.coords, other.coords))))

    def to_scipy(self):
        from scipy.sparse import csr_matrix
        return csr_matrix((self.weights.astype(np.float64), self.indices, self.indptr),
                          shape=(self.n, self.n))

    # binary form used by the CLI ``ingest`` command
    def save(self, path) -> None:
        payload = dict(indptr=self.indptr, indices=self.indices, weights=self.weights)
        if self.coords is not None:
            payload["coords"] = self.coords
        if self.id_map is not None:
            payload["id_map"] = self.id_map
        with open(path, "wb") as fh:
            np.savez(fh, **payload)

    @classmethod
    def load(cls, path) -> "RoadGraph":
        with np.load(path) as data:
            return cls(data["indptr"], data["indices"], data["weights"],
                       data["coords"] if "coords" in data else None,
                       data["id_map"] if "id_map" in data else None)


def _max_speed(g: RoadGraph) -> float:
    best = 0.0
    xy = g.coords
    for u, v, w in g.edges():
        e = math.hypot(xy[u, 0] - xy[v, 0], xy[u, 1] - xy[v, 1])
        if e > 0.0:
            best = max(best, e / w)
    return best


# --------------------------------------------------------------------------
# DIMACS parsing and normalization


@dataclass
class ParsedGraph:
    """Raw arc list straight out of a ``.gr`` file (0-based ids)."""

    n: int
    arcs: dict = field(default_factory=dict)  # (u, v) -> min weight
    coords: Optional[np.ndarray] = None


def parse_dimacs_gr(stream: TextIO) -> ParsedGraph:
    n = None
    arcs: dict = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line[0] == "c":
            continue
        parts = line.split()
        if parts[0] == "p":
            if n is not None:
                raise GraphFormatError(f"line {lineno}: duplicate problem line")
            if len(parts) != 4 or parts[1] != "sp":
                raise GraphFormatError(f"line {lineno}: malformed header")
            try:
                n = int(parts[2])
                int(parts[3])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: malformed header") from None
            if n < 0:
                raise GraphFormatError(f"line {lineno}: malformed header")
        elif parts[0] == "a":
            if n is None:
                raise GraphFormatError(f"line {lineno}: arc before header")
            if len(parts) != 4:
                raise GraphFormatError(f"line {lineno}: malformed arc")
            try:
                u, v, w = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: malformed arc") from None
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphFormatError(f"line {lineno}: vertex id out of range")
            if w <= 0:
                raise GraphFormatError(f"line {lineno}: non-positive weight")
            key = (u - 1, v - 1)
            old = arcs.get(key)
            if old is None or w < old:
                arcs[key] = w
        else:
            raise GraphFormatError(f"line {lineno}: unknown line type {parts[0]!r}")
    if n is None:
        raise GraphFormatError("missing header")
    return ParsedGraph(n, arcs)


def parse_dimacs_co(stream: TextIO, graph):
    """Attach ``v <id> <x> <y>`` coordinates to a parsed or normalized graph.

    For a normalized graph the file is in the original numbering; it must
    cover every original id up to the largest one listed.
    """
    normalized = isinstance(graph, RoadGraph)
    entries = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line[0] in "cp":
            continue
        parts = line.split()
        if parts[0] != "v" or len(parts) != 4:
            raise GraphFormatError(f"line {lineno}: malformed coordinate line")
        try:
            vid, x, y = int(parts[1]), float(parts[2]), float(parts[3])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: malformed coordinate line") from None
        if vid < 1 or (not normalized and vid > graph.n):
            raise GraphFormatError(f"line {lineno}: vertex id out of range")
        if vid in entries:
            raise GraphFormatError(f"line {lineno}: duplicate vertex {vid}")
        entries[vid] = (x, y)
    n = graph.n
    if normalized and graph.id_map is not None:
        n = max(int(np.max(graph.id_map)) + 1, max(entries, default=0))
    if len(entries) != n or (entries and max(entries) != n):
        raise GraphFormatError(f"coordinate count mismatch: {len(entries)} of {n} vertices")
    coords = np.array([entries[i + 1] for i in range(n)], dtype=np.float64).reshape(n, 2)
    if normalized:
        if graph.id_map is not None:
            coords = coords[graph.id_map]
        graph.coords = coords
        graph._max_speed = None
    else:
        graph.coords = coords
    return graph


def read_coordinates(stream: TextIO, original_n: int) -> np.ndarray:
    """Parse a ``.co`` file for a graph with ``original_n`` vertices."""
    holder = ParsedGraph(original_n)
    parse_dimacs_co(stream, holder)
    return holder.coords


def normalize(parsed) -> RoadGraph:
    """Symmetrize, keep the largest connected component, re-densify ids.

    Accepts a :class:`ParsedGraph` or a :class:`RoadGraph`. The returned
    graph's ``id_map[new]`` holds the input id of each kept vertex.
    """
    if isinstance(parsed, RoadGraph):
        n = parsed.n
        arcs = {(u, v): w for u, v, w in parsed.edges()}
        coords = parsed.coords
        base_map = parsed.id_map
    else:
        n = parsed.n
        arcs = parsed.arcs
        coords = parsed.coords
        base_map = None
    if n == 0:
        raise ValueError("empty graph")
    best: dict = {}
    for (u, v), w in arcs.items():
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        old = best.get(key)
        if old is None or w < old:
            best[key] = w
    full = RoadGraph._from_undirected(n, best)
    comp = _components(full)
    # largest component; ties go to the one holding the smallest vertex id
    sizes: dict = {}
    first: dict = {}
    for v, c in enumerate(comp):
        sizes[c] = sizes.get(c, 0) + 1
        first.setdefault(c, v)
    keep_c = min(sizes, key=lambda c: (-sizes[c], first[c]))
    kept = [v for v in range(n) if comp[v] == keep_c]
    rank = {v: i for i, v in enumerate(kept)}
    sub = {}
    for (u, v), w in best.items():
        if u in rank and v in rank:
            sub[(rank[u], rank[v])] = w
    sub_coords = None if coords is None else np.asarray(coords)[kept]
    g = RoadGraph._from_undirected(len(kept), sub, sub_coords)
    ids = np.asarray(kept, dtype=np.int64)
    g.id_map = ids if base_map is None else np.asarray(base_map)[ids]
    return g


def _components(g: RoadGraph) -> list:
    comp = [-1] * g.n
    adj = g.adj
    c = 0
    for s in range(g.n):
        if comp[s] >= 0:
            continue
        comp[s] = c
        stack = [s]
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if comp[v] < 0:
                    comp[v] = c
                    stack.append(v)
        c += 1
    return comp


def write_id_map(graph: RoadGraph, stream: TextIO) -> None:
    """Two columns: original 1-based DIMACS id, new 0-based id."""
    ids = graph.id_map if graph.id_map is not None else np.arange(graph.n)
    for new, old in enumerate(ids.tolist()):
        stream.write(f"{old + 1} {new}\n")


# --------------------------------------------------------------------------
# Dijkstra variants


def dijkstra(graph: RoadGraph, source: int) -> list:
    """Single-source distances to every vertex (``inf`` if unreachable)."""
    adj = graph.adj
    dist = [INF] * graph.n
    dist[source] = 0
    done = [False] * graph.n
    pq = [(0, source)]
    pop, push = heapq.heappop, heapq.heappush
    while pq:
        d, u = pop(pq)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                push(pq, (nd, v))
    return dist


def dijkstra_multi_target(graph: RoadGraph, source: int, targets: Iterable[int],
                          stats: Optional[dict] = None) -> dict:
    """Exact distances to ``targets``; stops once all of them are settled.

    The search may expand any vertex of the graph. ``stats['settled']`` gets
    the number of settled vertices.
    """
    remaining = set(targets)
    if not remaining:
        raise ValueError("targets must be non-empty")
    adj = graph.adj
    dist = {source: 0}
    done = set()
    out = {}
    pq = [(0, source)]
    pop, push = heapq.heappop, heapq.heappush
    while pq and remaining:
        d, u = pop(pq)
        if u in done:
            continue
        done.add(u)
        if u in remaining:
            remaining.discard(u)
            out[u] = d
        for v, w in adj[u]:
            nd = d + w
            if nd < dist.get(v, INF):
                dist[v] = nd
                push(pq, (nd, v))
    assert not remaining, "unreachable target (graph not normalized?)"
    if stats is not None:
        stats["settled"] = len(done)
    return out


def subgraph_dijkstra(graph: RoadGraph, source: int, first: int, last: int) -> tuple:
    """Plain multi-target Dijkstra to the id range ``[first, last)``.

    Returns ``(distances, settled)`` with ``distances[i] = d(source, first+i)``.
    Used as the unrestricted baseline for the border-set search.
    """
    adj = graph.adj
    size = last - first
    out = [None] * size
    remaining = size
    dist = {source: 0}
    done = set()
    pq = [(0, source)]
    pop, push = heapq.heappop, heapq.heappush
    while remaining:
        d, u = pop(pq)
        if u in done:
            continue
        done.add(u)
        if first <= u < last:
            out[u - first] = d
            remaining -= 1
        for v, w in adj[u]:
            nd = d + w
            if nd < dist.get(v, INF):
                dist[v] = nd
                push(pq, (nd, v))
    return out, len(done)


@dataclass
class BorderContext:
    """Border set of a subgraph plus per-root-landmark border distance range.

    ``intra_ub`` is filled in by the search (tightest border-distance cap it
    proved); it is not an input.
    """

    border_set: list
    mb_minus: list
    mb_plus: list
    intra_ub: float = INF

    @classmethod
    def for_range(cls, graph: RoadGraph, first: int, last: int, root_rows) -> "BorderContext":
        adj = graph.adj
        borders = [v for v in range(first, last)
                   if any(not (first <= x < last) for x, _ in adj[v])]
        if borders:
            lo = [min(row[b] for b in borders) for row in root_rows]
            hi = [max(row[b] for b in borders) for row in root_rows]
        else:
            lo, hi = [], []
        return cls(borders, lo, hi)


def border_restricted_dijkstra(graph: RoadGraph, source: int, first: int, last: int,
                               ctx: BorderContext, root_rows,
                               trace: Optional[list] = None) -> tuple:
    """Exact distances from ``source`` to every vertex of ``[first, last)``.

    External vertices are ordered by ``d(source, v) + LB(v, B)`` where
    ``LB(v, B)`` is the root-landmark lower bound to the border set, kept
    monotone along paths (pathmax). An external vertex is dropped once its key
    exceeds an upper bound on the distance to every border: the root-landmark
    bound ``min_R d(l_R, source) + M+_R`` or, once every border has been
    reached, the largest tentative border distance.

    ``root_rows[i][v]`` is ``d(l_R_i, v)`` in this graph's numbering.
    Returns ``(distances, settled)``; ``trace`` (if given) receives the
    sequence of extracted keys.
    """
    adj = graph.adj
    size = last - first
    out = [None] * size
    remaining = size
    borders = ctx.border_set
    if not borders:
        out, settled = subgraph_dijkstra(graph, source, first, last)
        if trace is not None:
            trace.extend(sorted(out))
        return out, settled

    lo, hi = ctx.mb_minus, ctx.mb_plus
    rows = [(row, lo[i], hi[i]) for i, row in enumerate(root_rows)]
    ub_root = min(row[source] + hi[i] for i, row in enumerate(root_rows))
    cap = ub_root

    is_border = set(borders)
    border_left = len(borders)  # borders with no tentative distance yet
    border_max = 0

    def lb_border(v):
        best = 0
        for row, mlo, mhi in rows:
            x = row[v]
            if x > mhi:
                t = x - mhi
            elif x < mlo:
                t = mlo - x
            else:
                continue
            if t > best:
                best = t
        return best

    dist = {source: 0}
    key = {source: 0}
    done = set()
    pq = [(0, source)]
    pop, push = heapq.heappop, heapq.heappush
    if source in is_border:
        border_left -= 1
        if border_left == 0:
            cap = 0  # the source is the only border: nothing outside helps
    while remaining:
        k, u = pop(pq)
        if u in done or k != key[u]:
            continue
        done.add(u)
        if trace is not None:
            trace.append(k)
        du = dist[u]
        if first <= u < last:
            out[u - first] = du
            remaining -= 1
        for v, w in adj[u]:
            if v in done:
                continue
            nd = du + w
            if nd >= dist.get(v, INF):
                continue
            if first <= v < last:
                if v in is_border:
                    if v not in dist:
                        border_left -= 1
                    if nd > border_max:
                        border_max = nd
                    if border_left == 0 and border_max < cap:
                        # every border reached: no re-entry can be longer
                        cap = border_max
                dist[v] = nd
                kv = nd if nd > k else k
            else:
                kv = nd + lb_border(v)
                if kv < k:
                    kv = k  # pathmax
                if kv > cap:
                    continue
                dist[v] = nd
            key[v] = kv
            push(pq, (kv, v))
    ctx.intra_ub = cap
    return out, len(done)


def euclidean_lower_bound(graph: RoadGraph, u: int, v: int) -> int:
    """Admissible integer lower bound ``floor(euclid(u, v) / max_speed)``."""
    if graph.coords is None:
        raise UnsupportedOperation("euclidean bound needs coordinates")
    if u == v:
        return 0
    speed = graph.max_speed
    if speed <= 0:
        return 0
    xy = graph.coords
    e = math.hypot(xy[u, 0] - xy[v, 0], xy[u, 1] - xy[v, 1])
    return floor_bound(e / speed)


def floor_bound(x: float) -> int:
    # Network distances are integers, so any value below d(u, v) + 1 floors
    # to an admissible bound. The relative nudge keeps an exact integer that
    # float arithmetic delivered as 3.9999... from losing a whole unit.
    return max(0, math.floor(x * (1.0 + 1e-12)))


def approximate_diameter(graph: RoadGraph) -> int:
    """Double sweep from vertex 0; a lower bound on the true diameter."""
    if graph.n <= 1:
        return 0
    d0 = dijkstra(graph, 0)
    far = max(range(graph.n), key=lambda v: (d0[v], -v))
    d1 = dijkstra(graph, far)
    return max(d for d in d1 if d != INF)
