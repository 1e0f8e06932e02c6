"""Exact object search over a COL-Tree: AkNN, kFN, range and kNN.

All four follow the decoupled pattern: the tree hands out candidates in
order of a bound (lower bound for nearest, upper bound for farthest), a
distance backend scores them exactly, and the search stops once no queued
bound can improve the result.

Ranking ties are broken by object id everywhere, so results are a pure
function of the distances and equal a brute-force scan with the same rule.
Every per-query cursor lives in the query's own state; trees are never
mutated.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from .coltree import ColTree, node_lower_bound, node_upper_bound

OBJECT, LEAF, INTERNAL = 0, 1, 2


class Aggregate(enum.Enum):
    SUM = "sum"
    MAX = "max"

    @classmethod
    def parse(cls, value) -> "Aggregate":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())

    def __call__(self, values):
        return sum(values) if self is Aggregate.SUM else max(values)


@dataclass
class QueryStats:
    exact_distance_calls: int = 0  # network distances to objects
    landmark_distance_calls: int = 0  # network distances to leaf landmarks
    candidates_retrieved: int = 0
    nodes_visited: int = 0
    queue_ops: int = 0
    vertices_settled: int = 0
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)

    def merge(self, other: "QueryStats") -> None:
        for k, v in asdict(other).items():
            setattr(self, k, getattr(self, k) + v)


@dataclass
class ResultSet:
    items: List[tuple] = field(default_factory=list)  # (object, score)
    stats: QueryStats = field(default_factory=QueryStats)

    @property
    def objects(self) -> List[int]:
        return [p for p, _ in self.items]

    @property
    def scores(self) -> list:
        return [s for _, s in self.items]


def aggregate_minimizer(agg, constants: Sequence[float]):
    """Minimizer of ``agg(|C_1 - x|, ..., |C_n - x|)``.

    Sum: the lower median. Max: the midpoint of the extreme constants (may be
    a half-integer, which floats hold exactly).
    """
    agg = Aggregate.parse(agg)
    if not constants:
        raise ValueError("no constants")
    cs = sorted(constants)
    if agg is Aggregate.SUM:
        return cs[(len(cs) - 1) // 2]
    total = cs[0] + cs[-1]
    return total // 2 if total % 2 == 0 else total / 2


def best_odl_index(dists: Sequence[int], constants: Sequence[int], agg) -> int:
    """Index of the ODL entry minimizing the aggregate landmark lower bound.

    Binary-searches the minimizer and compares the two entries bracketing it
    by objective value (for sums the nearest entry is not always best).
    Ties go to the smaller index.
    """
    agg = Aggregate.parse(agg)
    x = aggregate_minimizer(agg, constants)
    i = bisect.bisect_left(dists, x)
    if i == 0:
        return 0
    if i == len(dists):
        return len(dists) - 1
    left = agg(abs(c - dists[i - 1]) for c in constants)
    right = agg(abs(c - dists[i]) for c in constants)
    return i - 1 if left <= right else i


class _Context:
    """Per-query derived values: root vectors and landmark distance bounds."""

    def __init__(self, col: ColTree, backend, queries: Sequence[int], stats: QueryStats):
        self.col = col
        self.sul = col.sul
        self.backend = backend
        self.queries = list(queries)
        self.stats = stats
        self.qroot = [self.sul.root_vector(q) for q in self.queries]
        self._bounds: Dict[int, list] = {}
        self._objroot: Dict[int, list] = {}

    def bounds(self, lm: int) -> list:
        """Per query vertex ``(LB, UB)`` on ``d(lm, q)`` from root landmarks."""
        out = self._bounds.get(lm)
        if out is None:
            j = self.col.root_lm_index.get(lm)
            if j is not None:
                out = [(qr[j], qr[j]) for qr in self.qroot]
            else:
                lr = self.col.lm_root[lm]
                out = []
                for qr in self.qroot:
                    lb, ub = 0, math.inf
                    for a, b in zip(lr, qr):
                        d = a - b if a > b else b - a
                        if d > lb:
                            lb = d
                        s = a + b
                        if s < ub:
                            ub = s
                    out.append((lb, ub))
            self._bounds[lm] = out
        return out

    def landmark_distances(self, lm: int) -> list:
        """Exact ``d(q, lm)`` for every query vertex (free for root landmarks)."""
        j = self.col.root_lm_index.get(lm)
        if j is not None:
            return [qr[j] for qr in self.qroot]
        out = []
        for q in self.queries:
            out.append(self.backend.exact_distance(q, lm))
            self.stats.landmark_distance_calls += 1
        return out

    def object_root(self, p: int) -> list:
        v = self._objroot.get(p)
        if v is None:
            v = self._objroot[p] = self.sul.root_vector(p)
        return v

    def node_lb(self, nid: int, qi: int) -> int:
        nd = self.col.nodes[nid]
        lbub = [self.bounds(lm)[qi] for lm in nd.landmarks]
        return node_lower_bound(nd, lbub, self.qroot[qi])

    def node_ub(self, nid: int, qi: int) -> int:
        nd = self.col.nodes[nid]
        ubs = [self.bounds(lm)[qi][1] for lm in nd.landmarks]
        return node_upper_bound(nd, ubs, self.qroot[qi])

    def exact(self, q: int, p: int) -> int:
        self.stats.exact_distance_calls += 1
        return self.backend.exact_distance(q, p)


def node_bounds(col: ColTree, q: int, nid: int) -> tuple:
    """``(lower, upper)`` bound on ``d(q, p)`` over the objects under ``nid``."""
    ctx = _Context(col, None, [q], QueryStats())
    return ctx.node_lb(nid, 0), ctx.node_ub(nid, 0)


def _kind(col: ColTree, nid: int) -> int:
    return LEAF if col.nodes[nid].is_leaf else INTERNAL


# --------------------------------------------------------------------------
# AkNN / kNN


class _NearestCursor:
    __slots__ = ("dists", "objs", "consts", "left", "right", "lm")

    def __init__(self, dists, objs, consts, start, lm):
        self.dists = dists
        self.objs = objs
        self.consts = consts
        self.left = start - 1  # next index to emit leftwards
        self.right = start  # next index to emit rightwards
        self.lm = lm

    def lb(self, i, agg) -> int:
        x = self.dists[i]
        return agg(c - x if c > x else x - c for c in self.consts)

    def peek(self, agg):
        """``(lb, index)`` of the next object to emit, or ``None``."""
        best = None
        if self.left >= 0:
            best = (self.lb(self.left, agg), self.left)
        if self.right < len(self.dists):
            r = (self.lb(self.right, agg), self.right)
            if best is None or r[0] < best[0]:
                best = r
        return best


def aknn(col: ColTree, backend, queries: Sequence[int], k: int, agg="max",
         trace: Optional[dict] = None) -> ResultSet:
    """The ``k`` objects with the smallest aggregate distance from ``queries``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not queries:
        raise ValueError("query set must be non-empty")
    agg = Aggregate.parse(agg)
    stats = QueryStats()
    t0 = time.perf_counter()
    settled0 = backend.settled
    if col.empty:
        return ResultSet([], stats)
    ctx = _Context(col, backend, queries, stats)
    nq = len(ctx.queries)
    nodes = col.nodes
    heap = [(0, _kind(col, col.root), col.root)]
    push, pop = heapq.heappush, heapq.heappop
    worst: list = []  # max-heap of (-score, -id): the current k best
    cursors: Dict[int, _NearestCursor] = {}
    keys = trace.setdefault("keys", []) if trace is not None else None
    inits = trace.setdefault("leaf_inits", []) if trace is not None else None
    scored = trace.setdefault("scored", []) if trace is not None else None

    def obj_lb(p: int, x: int, consts) -> int:
        pr = ctx.object_root(p)
        per_q = []
        for c, qr in zip(consts, ctx.qroot):
            best = c - x if c > x else x - c
            for a, b in zip(qr, pr):
                d = a - b if a > b else b - a
                if d > best:
                    best = d
            per_q.append(best)
        return agg(per_q)

    while heap:
        key, kind, eid = heap[0]
        if len(worst) == k and key > -worst[0][0]:
            break
        pop(heap)
        stats.queue_ops += 1
        if keys is not None:
            keys.append(key)
        if kind == OBJECT:
            score = agg([ctx.exact(q, eid) for q in ctx.queries])
            if scored is not None:
                scored.append((eid, score, key))
            item = (-score, -eid)
            if len(worst) < k:
                heapq.heappush(worst, item)
            elif item > worst[0]:
                heapq.heapreplace(worst, item)
            continue
        stats.nodes_visited += 1
        node = nodes[eid]
        if kind == INTERNAL:
            for c in node.children:
                lb = agg([ctx.node_lb(c, qi) for qi in range(nq)])
                push(heap, (lb if lb > key else key, _kind(col, c), c))
                stats.queue_ops += 1
            continue
        cur = cursors.get(eid)
        if cur is None:
            # ODL whose landmark is farthest (on average, by lower bound) from Q
            best_j, best_avg = 0, -1.0
            for j, lm in enumerate(node.landmarks):
                avg = sum(lb for lb, _ in ctx.bounds(lm)) / nq
                if avg > best_avg:
                    best_j, best_avg = j, avg
            if best_avg <= 0:
                best_j = 0
            lm = node.landmarks[best_j]
            consts = ctx.landmark_distances(lm)
            dists = node.odl_dist[best_j]
            start = best_odl_index(dists, consts, agg)
            cur = cursors[eid] = _NearestCursor(dists, node.odl_obj[best_j], consts, start, lm)
            if inits is not None:
                inits.append((eid, best_j, list(consts), start))
        while True:
            nxt = cur.peek(agg)
            if nxt is None:
                break
            bound = heap[0][0] if heap else math.inf
            if nxt[0] > bound:
                break
            i = nxt[1]
            if i == cur.left:
                cur.left -= 1
            else:
                cur.right += 1
            p = cur.objs[i]
            lb = obj_lb(p, cur.dists[i], cur.consts)
            push(heap, (lb if lb > key else key, OBJECT, p))
            stats.queue_ops += 1
            stats.candidates_retrieved += 1
        nxt = cur.peek(agg)
        if nxt is not None:
            push(heap, (nxt[0] if nxt[0] > key else key, LEAF, eid))
            stats.queue_ops += 1

    items = sorted(((-i, -s) for s, i in worst), key=lambda t: (t[1], t[0]))
    stats.vertices_settled = backend.settled - settled0
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items, stats)


def knn(col: ColTree, backend, q: int, k: int, trace: Optional[dict] = None) -> ResultSet:
    """The ``k`` objects nearest to ``q`` (AkNN with a single query vertex)."""
    return aknn(col, backend, [q], k, Aggregate.MAX, trace)


# --------------------------------------------------------------------------
# kFN


def kfn(col: ColTree, backend, q: int, k: int, trace: Optional[dict] = None) -> ResultSet:
    """The ``k`` objects farthest from ``q``; results sorted by descending distance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    stats = QueryStats()
    t0 = time.perf_counter()
    settled0 = backend.settled
    if col.empty:
        return ResultSet([], stats)
    ctx = _Context(col, backend, [q], stats)
    qr = ctx.qroot[0]
    nodes = col.nodes
    # max-queue via negated keys
    heap = [(-math.inf, _kind(col, col.root), col.root)]
    push, pop = heapq.heappush, heapq.heappop
    best: list = []  # min-heap of (score, -id): the current k farthest
    cursors: Dict[int, list] = {}  # leaf -> [dists, objs, C, rp]
    keys = trace.setdefault("keys", []) if trace is not None else None

    while heap:
        nkey, kind, eid = heap[0]
        key = -nkey
        if len(best) == k and key < best[0][0]:
            break
        pop(heap)
        stats.queue_ops += 1
        if keys is not None:
            keys.append(key)
        if kind == OBJECT:
            score = ctx.exact(q, eid)
            item = (score, -eid)
            if len(best) < k:
                heapq.heappush(best, item)
            elif item > best[0]:
                heapq.heapreplace(best, item)
            continue
        stats.nodes_visited += 1
        node = nodes[eid]
        if kind == INTERNAL:
            for c in node.children:
                ub = ctx.node_ub(c, 0)
                push(heap, (-(ub if ub < key else key), _kind(col, c), c))
                stats.queue_ops += 1
            continue
        cur = cursors.get(eid)
        if cur is None:
            # ODL whose landmark is closest to q by upper bound
            best_j = min(range(len(node.landmarks)),
                         key=lambda j: (ctx.bounds(node.landmarks[j])[0][1], j))
            c_exact = ctx.landmark_distances(node.landmarks[best_j])[0]
            dists = node.odl_dist[best_j]
            cur = cursors[eid] = [dists, node.odl_obj[best_j], c_exact, len(dists) - 1]
        dists, objs, c_exact, rp = cur
        while rp >= 0:
            bound = -heap[0][0] if heap else -math.inf
            if c_exact + dists[rp] < bound:
                break
            p = objs[rp]
            ub = c_exact + dists[rp]
            pr = ctx.object_root(p)
            for a, b in zip(qr, pr):
                if a + b < ub:
                    ub = a + b
            push(heap, (-(ub if ub < key else key), OBJECT, p))
            stats.queue_ops += 1
            stats.candidates_retrieved += 1
            rp -= 1
        cur[3] = rp
        if rp >= 0:
            ub = c_exact + dists[rp]
            push(heap, (-(ub if ub < key else key), LEAF, eid))
            stats.queue_ops += 1

    items = sorted(((-i, s) for s, i in best), key=lambda t: (-t[1], t[0]))
    stats.vertices_settled = backend.settled - settled0
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items, stats)


# --------------------------------------------------------------------------
# Range


def range_query(col: ColTree, backend, q: int, r) -> ResultSet:
    """All objects within network distance ``r`` of ``q`` (ascending ids).

    Scores are ``None`` for objects accepted by an upper bound alone.
    """
    if r < 0:
        raise ValueError("radius must be >= 0")
    stats = QueryStats()
    t0 = time.perf_counter()
    settled0 = backend.settled
    if col.empty:
        return ResultSet([], stats)
    ctx = _Context(col, backend, [q], stats)
    qr = ctx.qroot[0]
    nodes = col.nodes
    found: Dict[int, Optional[int]] = {}
    stack = [col.root]

    def take_all(nid):
        inner = [nid]
        while inner:
            nd = nodes[inner.pop()]
            if nd.is_leaf:
                for p in nd.odl_obj[0]:
                    found[p] = None
                stats.candidates_retrieved += len(nd.odl_obj[0])
            else:
                inner.extend(nd.children)

    def check(p, x, c_exact):
        stats.candidates_retrieved += 1
        pr = ctx.object_root(p)
        lb = c_exact - x if c_exact > x else x - c_exact
        ub = c_exact + x
        for a, b in zip(qr, pr):
            d = a - b if a > b else b - a
            if d > lb:
                lb = d
            if a + b < ub:
                ub = a + b
        if lb > r:
            return
        if ub <= r:
            found[p] = None
            return
        d = ctx.exact(q, p)
        if d <= r:
            found[p] = d

    while stack:
        nid = stack.pop()
        stats.queue_ops += 1
        stats.nodes_visited += 1
        node = nodes[nid]
        if not node.is_leaf:
            for c in node.children:
                if ctx.node_ub(c, 0) <= r:
                    take_all(c)
                elif ctx.node_lb(c, 0) <= r:
                    stack.append(c)
                    stats.queue_ops += 1
            continue
        # landmark: smallest M- + UB(q, l) within r, else farthest from q by LB
        lms = node.landmarks
        bnds = [ctx.bounds(lm)[0] for lm in lms]
        fits = [(node.m_minus[j] + bnds[j][1], j) for j in range(len(lms))
                if node.m_minus[j] + bnds[j][1] <= r]
        if fits:
            j = min(fits)[1]
        else:
            j = max(range(len(lms)), key=lambda t: (bnds[t][0], -t))
        c_exact = ctx.landmark_distances(lms[j])[0]
        dists, objs = node.odl_dist[j], node.odl_obj[j]
        ip = bisect.bisect_right(dists, r - c_exact)
        for i in range(ip):
            found[objs[i]] = None
        stats.candidates_retrieved += ip
        lp = bisect.bisect_right(dists, c_exact) - 1
        rp = max(ip, lp + 1)
        while lp >= ip and c_exact - dists[lp] <= r:
            check(objs[lp], dists[lp], c_exact)
            lp -= 1
        while rp < len(dists) and dists[rp] - c_exact <= r:
            check(objs[rp], dists[rp], c_exact)
            rp += 1

    items = sorted(found.items())
    stats.vertices_settled = backend.settled - settled0
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items, stats)
