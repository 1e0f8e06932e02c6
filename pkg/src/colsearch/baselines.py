"""Reference methods: brute force (also the correctness oracle), AUB for kFN,
and IER over an STR-packed R-tree for kNN / AkNN / range."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .graph import RoadGraph, UnsupportedOperation, floor_bound
from .query import Aggregate, QueryStats, ResultSet

KINDS = ("aknn", "knn", "kfn", "range")


def _exact(backend, stats, q, p):
    stats.exact_distance_calls += 1
    return backend.exact_distance(q, p)


def rank_nearest(scored, k):
    return sorted(scored, key=lambda t: (t[1], t[0]))[:k]


def rank_farthest(scored, k):
    return sorted(scored, key=lambda t: (-t[1], t[0]))[:k]


def brute_force(kind: str, objects: Sequence[int], backend, *, q=None, queries=None,
                k: int = 1, agg="max", r=None) -> ResultSet:
    """Score every object exactly and rank with the (score, id) rule."""
    stats = QueryStats()
    t0 = time.perf_counter()
    settled0 = backend.settled
    objs = sorted(set(objects))
    if kind == "aknn":
        fn = Aggregate.parse(agg)
        qs = list(queries)
        scored = [(p, fn([_exact(backend, stats, x, p) for x in qs])) for p in objs]
        items = rank_nearest(scored, k)
    elif kind == "knn":
        items = rank_nearest([(p, _exact(backend, stats, q, p)) for p in objs], k)
    elif kind == "kfn":
        items = rank_farthest([(p, _exact(backend, stats, q, p)) for p in objs], k)
    elif kind == "range":
        items = []
        for p in objs:
            d = _exact(backend, stats, q, p)
            if d <= r:
                items.append((p, d))
    else:
        raise ValueError(f"unknown query kind {kind!r}")
    stats.candidates_retrieved = len(objs)
    stats.vertices_settled = backend.settled - settled0
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items, stats)


def aub_kfn(objects: Sequence[int], sultree, backend, q: int, k: int) -> ResultSet:
    """Brute-force kFN that skips objects whose landmark upper bound cannot
    beat the current k-th farthest distance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    stats = QueryStats()
    t0 = time.perf_counter()
    settled0 = backend.settled
    qr = sultree.root_vector(q)
    cands = []
    for p in sorted(set(objects)):
        pr = sultree.root_vector(p)
        cands.append((min(a + b for a, b in zip(qr, pr)), p))
    stats.candidates_retrieved = len(cands)
    cands.sort(key=lambda t: (-t[0], t[1]))
    best: list = []  # (score, -id) min-heap
    for ub, p in cands:
        if len(best) == k:
            dk, neg_id = best[0]
            if ub < dk:
                break  # candidates are in descending bound order
            if ub == dk and p > -neg_id:
                continue
        d = _exact(backend, stats, q, p)
        item = (d, -p)
        if len(best) < k:
            heapq.heappush(best, item)
        elif item > best[0]:
            heapq.heapreplace(best, item)
    items = sorted(((-i, s) for s, i in best), key=lambda t: (-t[1], t[0]))
    stats.vertices_settled = backend.settled - settled0
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items, stats)


# --------------------------------------------------------------------------
# STR R-tree + IER


@dataclass
class Mbr:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @classmethod
    def around(cls, boxes) -> "Mbr":
        boxes = list(boxes)
        return cls(min(b.min_x for b in boxes), min(b.min_y for b in boxes),
                   max(b.max_x for b in boxes), max(b.max_y for b in boxes))

    def mindist(self, x: float, y: float) -> float:
        dx = max(self.min_x - x, 0.0, x - self.max_x)
        dy = max(self.min_y - y, 0.0, y - self.max_y)
        return math.hypot(dx, dy)

    def contains(self, other: "Mbr") -> bool:
        return (self.min_x <= other.min_x and self.min_y <= other.min_y
                and self.max_x >= other.max_x and self.max_y >= other.max_y)


@dataclass
class RNode:
    mbr: Mbr
    children: List[int] = field(default_factory=list)  # node ids (internal)
    objects: List[int] = field(default_factory=list)  # leaf entries

    @property
    def is_leaf(self) -> bool:
        return not self.children


class StrRtree:
    def __init__(self, nodes: List[RNode], root: int, coords, capacity: int):
        self.nodes = nodes
        self.root = root
        self.coords = coords
        self.capacity = capacity

    @property
    def empty(self) -> bool:
        return self.root < 0

    def leaf_objects(self) -> List[List[int]]:
        return [nd.objects for nd in self.nodes if nd.is_leaf and nd.objects]


def _str_pack(items, capacity, center):
    """Sort-tile-recursive grouping of ``items`` into runs of ``capacity``."""
    n = len(items)
    leaves = math.ceil(n / capacity)
    slices = math.ceil(math.sqrt(leaves))
    per_slice = slices * capacity
    items = sorted(items, key=lambda it: (center(it)[0], center(it)[1], it[-1]))
    groups = []
    for s in range(0, n, per_slice):
        run = sorted(items[s:s + per_slice], key=lambda it: (center(it)[1], center(it)[0], it[-1]))
        for g in range(0, len(run), capacity):
            groups.append(run[g:g + capacity])
    return groups


def build_strtree(objects: Sequence[int], coords, leaf_capacity: int = 32) -> StrRtree:
    objs = sorted(set(objects))
    if not objs:
        return StrRtree([], -1, coords, leaf_capacity)
    nodes: List[RNode] = []
    pts = [(float(coords[p][0]), float(coords[p][1]), p) for p in objs]
    level = []
    for grp in _str_pack(pts, leaf_capacity, lambda it: (it[0], it[1])):
        mbr = Mbr(min(g[0] for g in grp), min(g[1] for g in grp),
                  max(g[0] for g in grp), max(g[1] for g in grp))
        nodes.append(RNode(mbr, objects=[g[2] for g in grp]))
        level.append(len(nodes) - 1)
    while len(level) > 1:
        items = [((nodes[i].mbr.min_x + nodes[i].mbr.max_x) / 2,
                  (nodes[i].mbr.min_y + nodes[i].mbr.max_y) / 2, i) for i in level]
        nxt = []
        for grp in _str_pack(items, leaf_capacity, lambda it: (it[0], it[1])):
            kids = [g[2] for g in grp]
            nodes.append(RNode(Mbr.around(nodes[c].mbr for c in kids), children=kids))
            nxt.append(len(nodes) - 1)
        level = nxt
    return StrRtree(nodes, level[0], coords, leaf_capacity)


def ier(kind: str, rtree: StrRtree, graph: RoadGraph, backend, *, q=None, queries=None,
        k: int = 1, agg="max", r=None) -> ResultSet:
    """Incremental Euclidean restriction: branch and bound on Euclidean lower
    bounds (Euclidean distance over the network's max speed)."""
    if kind == "kfn":
        raise UnsupportedOperation("Euclidean bounds are not admissible for kFN")
    if kind not in ("knn", "aknn", "range"):
        raise ValueError(f"unknown query kind {kind!r}")
    stats = QueryStats()
    t0 = time.perf_counter()
    settled0 = backend.settled
    if rtree.empty:
        return ResultSet([], stats)
    speed = graph.max_speed
    xy = graph.coords
    qs = [q] if kind in ("knn", "range") else list(queries)
    qxy = [(float(xy[v][0]), float(xy[v][1])) for v in qs]
    fn = Aggregate.MAX if kind != "aknn" else Aggregate.parse(agg)

    def bound(values):
        return fn([floor_bound(v / speed) if speed > 0 else 0 for v in values])

    def node_key(nid):
        mbr = rtree.nodes[nid].mbr
        return bound([mbr.mindist(x, y) for x, y in qxy])

    def obj_key(p):
        px, py = float(xy[p][0]), float(xy[p][1])
        return bound([math.hypot(px - x, py - y) for x, y in qxy])

    if kind == "range":
        items = []
        stack = [rtree.root]
        while stack:
            nid = stack.pop()
            stats.nodes_visited += 1
            nd = rtree.nodes[nid]
            if nd.is_leaf:
                for p in nd.objects:
                    stats.candidates_retrieved += 1
                    if obj_key(p) <= r:
                        d = _exact(backend, stats, q, p)
                        if d <= r:
                            items.append((p, d))
            else:
                stack.extend(c for c in nd.children if node_key(c) <= r)
        items.sort()
    else:
        heap = [(0, 1, rtree.root)]
        worst: list = []
        while heap:
            key, is_node, eid = heap[0]
            if len(worst) == k and key > -worst[0][0]:
                break
            heapq.heappop(heap)
            stats.queue_ops += 1
            if not is_node:
                score = fn([_exact(backend, stats, x, eid) for x in qs])
                item = (-score, -eid)
                if len(worst) < k:
                    heapq.heappush(worst, item)
                elif item > worst[0]:
                    heapq.heapreplace(worst, item)
                continue
            stats.nodes_visited += 1
            nd = rtree.nodes[eid]
            if nd.is_leaf:
                for p in nd.objects:
                    heapq.heappush(heap, (obj_key(p), 0, p))
                    stats.candidates_retrieved += 1
            else:
                for c in nd.children:
                    heapq.heappush(heap, (node_key(c), 1, c))
        items = sorted(((-i, -s) for s, i in worst), key=lambda t: (t[1], t[0]))
    stats.vertices_settled = backend.settled - settled0
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items, stats)
