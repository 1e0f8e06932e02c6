"""Subgraph-landmark tree over a road network.

Every node owns a contiguous range of vertex ids in a hierarchy-aware
renumbering, a handful of local landmarks, and one distance list per
landmark covering exactly the node's range. All lists live in one flat
``array('Q')``; entry ``(landmark j, vertex v)`` of a node sits at
``sdl_base + j * len(range) + (v - first)``, so no vertex id is stored.

Public methods take and return original graph vertex ids. ``rank`` maps an
original id to its internal (renumbered) id and ``order`` maps back.
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
import struct
import sys
import time
from array import array
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

from .graph import (BorderContext, RoadGraph, border_restricted_dijkstra, dijkstra,
                    dijkstra_multi_target, subgraph_dijkstra)
from .partition import PartitionNode, recursive_partition

MAGIC = b"SULT"
VERSION = 1


class LandmarkPolicy(enum.IntEnum):
    RANDOM = 0
    FURTHEST_BORDER = 1
    SLICE_FURTHEST_BORDER = 2
    BORDER_MINMAX = 3

    @classmethod
    def parse(cls, name) -> "LandmarkPolicy":
        if isinstance(name, cls):
            return name
        if isinstance(name, int):
            return cls(name)
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"random": cls.RANDOM, "furthest": cls.FURTHEST_BORDER,
                   "furthest_border": cls.FURTHEST_BORDER, "farthest": cls.FURTHEST_BORDER,
                   "slice": cls.SLICE_FURTHEST_BORDER,
                   "slice_furthest_border": cls.SLICE_FURTHEST_BORDER,
                   "minmax": cls.BORDER_MINMAX, "border_minmax": cls.BORDER_MINMAX}
        if key not in aliases:
            raise ValueError(f"unknown landmark policy {name!r}")
        return aliases[key]


class LandmarkError(ValueError):
    pass


class IndexFormatError(ValueError):
    pass


@dataclass
class SulNode:
    first: int
    last: int
    depth: int = 0
    parent: int = -1
    children: List[int] = field(default_factory=list)
    landmarks: List[int] = field(default_factory=list)  # internal ids
    sdl_base: int = -1  # -1 while the lists are not computed
    settled: int = 0  # vertices settled computing this node's lists
    settled_plain: int = 0  # same, unrestricted search (only when measured)

    @property
    def size(self) -> int:
        return self.last - self.first

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def contains(self, v: int) -> bool:
        return self.first <= v < self.last


def assign_subgraph_order(ptree: PartitionNode):
    """Number vertices leaf by leaf in DFS order.

    Returns ``(order, nodes)``: ``order[new] = old`` and ``nodes`` in level
    (BFS) order, root first, each a :class:`SulNode` with its id range, plus
    the matching partition nodes.
    """
    order: list = []
    ranges = {}
    # iterative DFS to survive deep trees
    stack = [(ptree, False)]
    starts = {}
    while stack:
        pn, done = stack.pop()
        if done:
            ranges[id(pn)] = (starts[id(pn)], len(order))
            continue
        starts[id(pn)] = len(order)
        if pn.is_leaf:
            order.extend(sorted(pn.vertices))
            ranges[id(pn)] = (starts[id(pn)], len(order))
            continue
        stack.append((pn, True))
        for c in reversed(pn.children):
            stack.append((c, False))

    nodes: List[SulNode] = []
    pnodes: List[PartitionNode] = []
    q = deque([(ptree, -1, 0)])
    while q:
        pn, parent, depth = q.popleft()
        nid = len(nodes)
        first, last = ranges[id(pn)]
        nodes.append(SulNode(first, last, depth, parent))
        pnodes.append(pn)
        if parent >= 0:
            nodes[parent].children.append(nid)
        for c in pn.children:
            q.append((c, nid, depth + 1))
    return order, nodes, pnodes


def _borders(graph: RoadGraph, first: int, last: int) -> list:
    adj = graph.adj
    return [v for v in range(first, last)
            if any(not (first <= x < last) for x, _ in adj[v])]


def select_landmarks(graph: RoadGraph, first: int, last: int, policy, m: int,
                     rng: random.Random) -> list:
    """Pick ``m`` distinct landmarks from the id range ``[first, last)``.

    ``graph`` must already be in the renumbered order.
    """
    policy = LandmarkPolicy.parse(policy)
    size = last - first
    if size < 1:
        raise LandmarkError("empty subgraph")
    if m > size:
        raise LandmarkError("m exceeds subgraph size")
    if m < 1:
        raise LandmarkError("m must be >= 1")
    if policy is LandmarkPolicy.RANDOM:
        return sorted(rng.sample(range(first, last), m))

    borders = _borders(graph, first, last)
    chosen: list = []
    if policy is LandmarkPolicy.FURTHEST_BORDER:
        if borders:
            chosen.append(rng.choice(borders))
            near = {b: math.inf for b in borders}
            while len(chosen) < m and len(chosen) < len(borders):
                d = dijkstra_multi_target(graph, chosen[-1], borders)
                for b in borders:
                    near[b] = min(near[b], d[b])
                nxt = max((b for b in borders if b not in chosen),
                          key=lambda b: (near[b], -b))
                chosen.append(nxt)
    elif policy is LandmarkPolicy.SLICE_FURTHEST_BORDER:
        if graph.coords is None:
            raise LandmarkError("slice policy needs coordinates")
        xy = graph.coords
        cx = float(xy[first:last, 0].mean())
        cy = float(xy[first:last, 1].mean())
        width = 2 * math.pi / m

        def sector(v):
            a = math.atan2(xy[v, 1] - cy, xy[v, 0] - cx) % (2 * math.pi)
            return min(int(a // width), m - 1)

        def far(v):
            return (math.hypot(xy[v, 0] - cx, xy[v, 1] - cy), -v)

        by_sector_b = [[] for _ in range(m)]
        by_sector_v = [[] for _ in range(m)]
        bset = set(borders)
        for v in range(first, last):
            s = sector(v)
            by_sector_v[s].append(v)
            if v in bset:
                by_sector_b[s].append(v)
        for s in range(m):
            pool = by_sector_b[s] or by_sector_v[s]
            if pool:
                chosen.append(max(pool, key=far))
    elif policy is LandmarkPolicy.BORDER_MINMAX:
        refs = borders if borders else list(range(first, last))
        sample = rng.sample(refs, min(16, len(refs)))
        worst = [0] * size
        targets = range(first, last)
        for s in sample:
            d = dijkstra_multi_target(graph, s, targets)
            for v in targets:
                if d[v] > worst[v - first]:
                    worst[v - first] = d[v]
        ranked = sorted(range(first, last), key=lambda v: (worst[v - first], v))
        chosen = ranked[:m]
    # pad with random subgraph vertices
    if len(chosen) < m:
        rest = [v for v in range(first, last) if v not in set(chosen)]
        chosen.extend(rng.sample(rest, m - len(chosen)))
    return chosen


class SulTree:
    def __init__(self, n, b, alpha, m, m_root, policy, seed, order, nodes, store):
        self.n = n
        self.b = b
        self.alpha = alpha
        self.m = m
        self.m_root = m_root
        self.policy = LandmarkPolicy.parse(policy)
        self.seed = seed
        self.order = list(order)  # internal -> original
        self.rank = [0] * n  # original -> internal
        for i, v in enumerate(self.order):
            self.rank[v] = i
        self.nodes: List[SulNode] = nodes
        self.store = store
        self.graph_r: Optional[RoadGraph] = None  # renumbered graph (for lazy lists)
        self.build_seconds = 0.0

    # ---- basic lookups -------------------------------------------------
    @property
    def root(self) -> SulNode:
        return self.nodes[0]

    @property
    def root_landmarks(self) -> list:
        return [self.order[x] for x in self.root.landmarks]

    def landmarks(self, node_id: int) -> list:
        return [self.order[x] for x in self.nodes[node_id].landmarks]

    def sdl(self, node_id: int, j: int, v: int) -> int:
        """``d(landmark j of node, v)`` for original vertex ``v`` inside the node."""
        node = self.nodes[node_id]
        if node.sdl_base < 0:
            self.ensure_sdl(node_id)
        vi = self.rank[v]
        if not node.first <= vi < node.last:
            raise KeyError(f"vertex {v} not in node {node_id}")
        return self.store[node.sdl_base + j * node.size + (vi - node.first)]

    def sdl_row(self, node_id: int, j: int):
        node = self.nodes[node_id]
        if node.sdl_base < 0:
            self.ensure_sdl(node_id)
        start = node.sdl_base + j * node.size
        return self.store[start:start + node.size]

    def root_vector(self, v: int) -> list:
        """Distances from every root landmark to original vertex ``v``."""
        vi = self.rank[v]
        n, st = self.n, self.store
        return [st[j * n + vi] for j in range(len(self.root.landmarks))]

    def root_vector_internal(self, vi: int) -> list:
        n, st = self.n, self.store
        return [st[j * n + vi] for j in range(len(self.root.landmarks))]

    def leaf_of(self, v: int) -> int:
        vi = self.rank[v]
        nid = 0
        while self.nodes[nid].children:
            for c in self.nodes[nid].children:
                if self.nodes[c].contains(vi):
                    nid = c
                    break
        return nid

    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes)

    def store_entries_expected(self) -> int:
        return sum(len(nd.landmarks) * nd.size for nd in self.nodes if nd.sdl_base >= 0)

    def gamma(self) -> dict:
        """Settled/size ratios of the list computations (non-root nodes)."""
        work = [nd for nd in self.nodes[1:] if nd.sdl_base >= 0]
        out = {"nodes": len(work)}
        tot = sum(len(nd.landmarks) * nd.size for nd in work)
        if tot:
            out["gamma"] = sum(nd.settled for nd in work) / tot
            if all(nd.settled_plain for nd in work):
                out["gamma_plain"] = sum(nd.settled_plain for nd in work) / tot
        return out

    # ---- root point-to-point bounds -------------------------------------
    def root_point_lb(self, u: int, v: int) -> int:
        a, b = self.root_vector(u), self.root_vector(v)
        return max(abs(x - y) for x, y in zip(a, b))

    def root_point_ub(self, u: int, v: int) -> int:
        a, b = self.root_vector(u), self.root_vector(v)
        return min(x + y for x, y in zip(a, b))

    # ---- lazy lists -----------------------------------------------------
    def attach(self, graph: RoadGraph) -> None:
        """Give a deserialized tree its graph so lazy lists can be computed."""
        if graph.n != self.n:
            raise ValueError("graph does not match tree")
        self.graph_r = graph.permuted(self.order)

    def ensure_sdl(self, node_id: int) -> None:
        node = self.nodes[node_id]
        if node.sdl_base >= 0:
            return
        if self.graph_r is None:
            raise RuntimeError("lazy node needs the graph; call attach(graph)")
        if node.parent >= 0 and self.nodes[node.parent].sdl_base < 0:
            self.ensure_sdl(node.parent)
        _compute_node(self, node_id, self.graph_r, measure_plain=False)

    # ---- identity / serialization --------------------------------------
    def checksum(self) -> bytes:
        h = hashlib.blake2b(digest_size=16)
        h.update(struct.pack("<7q", self.b, self.alpha, self.m, self.m_root,
                             int(self.policy), self.seed, self.n))
        h.update(array("q", self.order).tobytes())
        for nd in self.nodes:
            h.update(struct.pack("<2q", nd.first, nd.last))
            h.update(array("q", nd.landmarks).tobytes())
        return h.digest()

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += MAGIC
        out += struct.pack("<I", VERSION)
        out += struct.pack("<6q2Q", self.b, self.alpha, self.m, self.m_root,
                           int(self.policy), self.seed, self.n, len(self.nodes))
        out += _le(array("q", self.order))
        for nd in self.nodes:
            out += struct.pack("<5q", nd.first, nd.last, nd.depth, nd.parent, nd.sdl_base)
            out += struct.pack("<2q", nd.settled, nd.settled_plain)
            out += struct.pack("<q", len(nd.children)) + _le(array("q", nd.children))
            out += struct.pack("<q", len(nd.landmarks)) + _le(array("q", nd.landmarks))
        out += struct.pack("<Q", len(self.store))
        out += _le(self.store)
        return bytes(out)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "SulTree":
        r = _Reader(buf)
        if r.take(4) != MAGIC:
            raise IndexFormatError("bad magic")
        (version,) = r.unpack("<I")
        if version != VERSION:
            raise IndexFormatError(f"version mismatch: {version}")
        b, alpha, m, m_root, policy, seed, n, count = r.unpack("<6q2Q")
        order = r.array("q", n)
        nodes = []
        for _ in range(count):
            first, last, depth, parent, base = r.unpack("<5q")
            settled, plain = r.unpack("<2q")
            (nc,) = r.unpack("<q")
            children = r.array("q", nc)
            (nl,) = r.unpack("<q")
            lms = r.array("q", nl)
            nodes.append(SulNode(first, last, depth, parent, list(children), list(lms),
                                 base, settled, plain))
        (slen,) = r.unpack("<Q")
        store = r.array("Q", slen)
        if not r.at_end():
            raise IndexFormatError("trailing bytes after index")
        return cls(n, b, alpha, m, m_root, policy, seed, order, nodes, store)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SulTree":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _le(arr: array) -> bytes:
    if sys.byteorder != "little":
        arr = array(arr.typecode, arr)
        arr.byteswap()
    return arr.tobytes()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.buf):
            raise IndexFormatError("unexpected end of index")
        out = bytes(self.buf[self.pos:self.pos + k])
        self.pos += k
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, code: str, count: int) -> array:
        a = array(code)
        a.frombytes(self.take(a.itemsize * count))
        if sys.byteorder != "little":
            a.byteswap()
        return a

    def at_end(self) -> bool:
        return self.pos == len(self.buf)


def _node_rng(seed: int, node_id: int) -> random.Random:
    return random.Random(seed * 1_000_003 + node_id)


def _compute_node(tree: SulTree, nid: int, gr: RoadGraph, measure_plain: bool) -> None:
    node = tree.nodes[nid]
    rng = _node_rng(tree.seed, nid)
    want = tree.m_root if nid == 0 else tree.m
    m = min(want, node.size)
    node.landmarks = select_landmarks(gr, node.first, node.last, tree.policy, m, rng)
    base = len(tree.store)
    store = tree.store
    if nid == 0:
        for lm in node.landmarks:
            store.extend(dijkstra(gr, lm))
        node.settled = m * node.size
        node.settled_plain = node.settled
    else:
        root_rows = [tree.store[j * tree.n:(j + 1) * tree.n]
                     for j in range(len(tree.root.landmarks))]
        ctx = BorderContext.for_range(gr, node.first, node.last, root_rows)
        settled = plain = 0
        for lm in node.landmarks:
            row, s = border_restricted_dijkstra(gr, lm, node.first, node.last, ctx, root_rows)
            store.extend(row)
            settled += s
            if measure_plain:
                _, p = subgraph_dijkstra(gr, lm, node.first, node.last)
                plain += p
        node.settled = settled
        node.settled_plain = plain
    node.sdl_base = base


def build_sultree(graph: RoadGraph, b: int = 8, alpha: int = 1024, m: int = 2,
                  m_root: int = 16, policy="random", seed: int = 0,
                  lazy_depth: Optional[int] = None, measure_plain: bool = False,
                  partitioner=None) -> SulTree:
    """Partition, renumber and compute every node's distance lists.

    Nodes are processed in level order so the root lists exist before any
    border-restricted search runs. With ``lazy_depth`` set, nodes deeper than
    that are left uncomputed until first requested.
    """
    if alpha < b:
        raise ValueError("alpha must be >= b")
    if m < 1 or m_root < 1:
        raise ValueError("m must be >= 1")
    if m_root > graph.n:
        raise LandmarkError("m exceeds subgraph size")
    t0 = time.perf_counter()
    ptree = recursive_partition(graph, b, alpha, partitioner)
    order, nodes, _ = assign_subgraph_order(ptree)
    gr = graph.permuted(order)
    tree = SulTree(graph.n, b, alpha, m, m_root, policy, seed, order, nodes, array("Q"))
    tree.graph_r = gr
    for nid, node in enumerate(nodes):
        if lazy_depth is not None and node.depth > lazy_depth:
            continue
        _compute_node(tree, nid, gr, measure_plain)
    tree.build_seconds = time.perf_counter() - t0
    return tree
