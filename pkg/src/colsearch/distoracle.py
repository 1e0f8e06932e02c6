"""Exact point-to-point distance backends.

Query algorithms only ever call ``exact_distance``; which backend answers
is up to the caller. Each instance counts its calls and is not meant to be
shared between threads.
"""

from __future__ import annotations

import heapq
from collections import OrderedDict
from typing import Optional

import numpy as np

from .graph import INF, RoadGraph


class DistanceBackend:
    name = "base"

    def __init__(self, graph: RoadGraph):
        self.graph = graph
        self.distance_calls = 0
        self.settled = 0

    def exact_distance(self, s: int, t: int) -> int:
        self.distance_calls += 1
        if s == t:
            return 0
        return self._distance(s, t)

    def _distance(self, s: int, t: int) -> int:
        raise NotImplementedError

    def reset_counters(self) -> None:
        self.distance_calls = 0
        self.settled = 0


class BidirectionalDijkstra(DistanceBackend):
    """Forward and backward searches, stopping once the two queue tops
    together reach the best meeting distance."""

    name = "bidijkstra"

    def _distance(self, s, t):
        adj = self.graph.adj
        dist = ({s: 0}, {t: 0})
        done = (set(), set())
        pqs = ([(0, s)], [(0, t)])
        best = INF
        pop, push = heapq.heappop, heapq.heappush
        while pqs[0] and pqs[1]:
            if pqs[0][0][0] + pqs[1][0][0] >= best:
                break
            side = 0 if pqs[0][0][0] <= pqs[1][0][0] else 1
            d, u = pop(pqs[side])
            if u in done[side]:
                continue
            done[side].add(u)
            self.settled += 1
            mine, other = dist[side], dist[1 - side]
            for v, w in adj[u]:
                nd = d + w
                if nd < mine.get(v, INF):
                    mine[v] = nd
                    push(pqs[side], (nd, v))
                ov = other.get(v)
                if ov is not None and nd + ov < best:
                    best = nd + ov
        return best


class AltAStar(DistanceBackend):
    """A* guided by the root-landmark lower bound (consistent heuristic)."""

    name = "alt"

    def __init__(self, graph: RoadGraph, sultree):
        super().__init__(graph)
        self.sul = sultree
        self._rows = None

    def _root_rows(self):
        if self._rows is None:
            sul = self.sul
            n = sul.n
            k = len(sul.root.landmarks)
            rank = np.asarray(sul.rank)
            flat = np.frombuffer(sul.store, dtype=np.uint64, count=k * n).reshape(k, n)
            # rows in original vertex numbering, as python lists for speed
            self._rows = [flat[j][rank].astype(np.int64).tolist() for j in range(k)]
        return self._rows

    def _distance(self, s, t):
        rows = self._root_rows()
        tv = [row[t] for row in rows]
        pairs = list(zip(rows, tv))

        def h(v):
            best = 0
            for row, x in pairs:
                y = row[v] - x
                if y < 0:
                    y = -y
                if y > best:
                    best = y
            return best

        adj = self.graph.adj
        g = {s: 0}
        done = set()
        pq = [(h(s), s)]
        pop, push = heapq.heappop, heapq.heappush
        while pq:
            _, u = pop(pq)
            if u in done:
                continue
            if u == t:
                return g[u]
            done.add(u)
            self.settled += 1
            gu = g[u]
            for v, w in adj[u]:
                nd = gu + w
                if nd < g.get(v, INF):
                    g[v] = nd
                    push(pq, (nd + h(v), v))
        return INF


class CachedSourceDijkstra(DistanceBackend):
    """One full Dijkstra per source, kept in a small LRU cache.

    Suited to object search where the same query vertex is asked about many
    objects in a row.
    """

    name = "sssp-cache"

    def __init__(self, graph: RoadGraph, capacity: int = 64):
        super().__init__(graph)
        self.capacity = capacity
        self._cache: OrderedDict = OrderedDict()
        self._csr = graph.to_scipy()

    def _row(self, s):
        row = self._cache.get(s)
        if row is None:
            from scipy.sparse.csgraph import dijkstra as sp_dijkstra

            row = np.rint(sp_dijkstra(self._csr, directed=False, indices=s)).astype(np.int64)
            row = row.tolist()
            self.settled += self.graph.n
            self._cache[s] = row
            if len(self._cache) > self.capacity:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(s)
        return row

    def _distance(self, s, t):
        return self._row(s)[t]


class DistanceTable(DistanceBackend):
    """All-pairs table for desk-scale graphs (one C-level Dijkstra per vertex)."""

    name = "table"

    def __init__(self, graph: RoadGraph, table: Optional[np.ndarray] = None):
        super().__init__(graph)
        if table is None:
            from scipy.sparse.csgraph import dijkstra as sp_dijkstra
            table = sp_dijkstra(graph.to_scipy(), directed=False)
            table = np.rint(table).astype(np.int64)
        self.table = table
        self._rows = {}

    def _distance(self, s, t):
        row = self._rows.get(s)
        if row is None:
            row = self._rows[s] = self.table[s].tolist()
        return row[t]

    def share(self) -> "DistanceTable":
        """A fresh-counter view over the same table."""
        other = DistanceTable(self.graph, self.table)
        other._rows = self._rows
        return other


BACKENDS = {
    "bidijkstra": BidirectionalDijkstra,
    "sssp-cache": CachedSourceDijkstra,
    "table": DistanceTable,
}


def make_backend(name: str, graph: RoadGraph, sultree=None) -> DistanceBackend:
    if name == "alt":
        if sultree is None:
            raise ValueError("alt backend needs a SUL-Tree")
        return AltAStar(graph, sultree)
    try:
        return BACKENDS[name](graph)
    except KeyError:
        raise ValueError(f"unknown backend {name!r}") from None


def exact_distance(backend: DistanceBackend, s: int, t: int) -> int:
    return backend.exact_distance(s, t)
