"""Compacted object-landmark tree built from a :class:`SulTree` and an object set.

Leaves keep one sorted object distance list (ODL) per landmark. Every node
keeps, per own landmark and per root landmark, the min and max distance to
any object below it, which is all the node bounds need.
"""

from __future__ import annotations

import bisect
import struct
import time
from array import array
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, TextIO

from .sultree import IndexFormatError, SulTree, _le, _Reader

MAGIC = b"COLT"
VERSION = 1


@dataclass
class ColNode:
    sul: int  # SUL-Tree node this node was made from
    landmarks: List[int]  # original vertex ids
    m_minus: List[int]
    m_plus: List[int]
    mr_minus: List[int]
    mr_plus: List[int]
    children: List[int] = field(default_factory=list)
    # leaf only: per landmark, distances ascending and the aligned object ids
    odl_dist: List[List[int]] = field(default_factory=list)
    odl_obj: List[List[int]] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def objects(self) -> List[int]:
        return sorted(self.odl_obj[0]) if self.odl_obj else []


class _Counted:
    """Sort key that counts comparisons (build-work measurement)."""

    __slots__ = ("k", "box")

    def __init__(self, k, box):
        self.k = k
        self.box = box

    def __lt__(self, other):
        self.box[0] += 1
        return self.k < other.k


class ColTree:
    def __init__(self, sul: SulTree, lam: int, nodes: List[ColNode], root: int,
                 object_count: int):
        self.sul = sul
        self.lam = lam
        self.nodes = nodes
        self.root = root  # -1 for an empty tree
        self.object_count = object_count
        self.build_work: Optional[dict] = None
        self.build_seconds = 0.0
        self._prepare()

    def _prepare(self) -> None:
        # derived, not serialized: root-landmark vectors for node landmarks
        sul = self.sul
        self.lm_root = {}
        for nd in self.nodes:
            for lm in nd.landmarks:
                if lm not in self.lm_root:
                    self.lm_root[lm] = sul.root_vector(lm)
        self.root_lm_index = {lm: j for j, lm in enumerate(sul.root_landmarks)}

    @property
    def empty(self) -> bool:
        return self.root < 0

    def leaves(self) -> List[int]:
        return [i for i, nd in enumerate(self.nodes) if nd.is_leaf]

    def objects_below(self, nid: int) -> List[int]:
        out = []
        stack = [nid]
        while stack:
            nd = self.nodes[stack.pop()]
            if nd.is_leaf:
                out.extend(nd.odl_obj[0])
            else:
                stack.extend(nd.children)
        return out

    def all_objects(self) -> List[int]:
        return [] if self.empty else sorted(self.objects_below(self.root))

    def depth(self) -> int:
        if self.empty:
            return 0
        best = 0
        stack = [(self.root, 0)]
        while stack:
            nid, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in self.nodes[nid].children)
        return best

    # ---- serialization --------------------------------------------------
    def to_bytes(self) -> bytes:
        out = bytearray(MAGIC)
        out += struct.pack("<I", VERSION)
        out += self.sul.checksum()
        out += struct.pack("<4q", self.lam, self.object_count, len(self.nodes), self.root)
        for nd in self.nodes:
            m = len(nd.landmarks)
            out += struct.pack("<4q", int(nd.is_leaf), nd.sul, m, len(nd.mr_minus))
            out += _le(array("q", nd.landmarks))
            out += _le(array("Q", nd.m_minus)) + _le(array("Q", nd.m_plus))
            out += _le(array("Q", nd.mr_minus)) + _le(array("Q", nd.mr_plus))
            out += struct.pack("<q", len(nd.children)) + _le(array("q", nd.children))
            if nd.is_leaf:
                size = len(nd.odl_obj[0])
                out += struct.pack("<q", size)
                for j in range(m):
                    out += _le(array("q", nd.odl_obj[j])) + _le(array("Q", nd.odl_dist[j]))
        return bytes(out)

    @classmethod
    def from_bytes(cls, buf: bytes, sul: SulTree) -> "ColTree":
        r = _Reader(buf)
        if r.take(4) != MAGIC:
            raise IndexFormatError("bad magic")
        (version,) = r.unpack("<I")
        if version != VERSION:
            raise IndexFormatError(f"version mismatch: {version}")
        if r.take(16) != sul.checksum():
            raise IndexFormatError("checksum mismatch: index was built from a different SUL-Tree")
        lam, count, n_nodes, root = r.unpack("<4q")
        nodes = []
        for _ in range(n_nodes):
            leaf, sid, m, mr = r.unpack("<4q")
            lms = list(r.array("q", m))
            mm, mp = list(r.array("Q", m)), list(r.array("Q", m))
            rm, rp = list(r.array("Q", mr)), list(r.array("Q", mr))
            (nc,) = r.unpack("<q")
            children = list(r.array("q", nc))
            nd = ColNode(sid, lms, mm, mp, rm, rp, children)
            if leaf:
                (size,) = r.unpack("<q")
                for _ in range(m):
                    nd.odl_obj.append(list(r.array("q", size)))
                    nd.odl_dist.append(list(r.array("Q", size)))
            nodes.append(nd)
        if not r.at_end():
            raise IndexFormatError("trailing bytes after index")
        return cls(sul, lam, nodes, root, count)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path, sul: SulTree) -> "ColTree":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), sul)


def build_coltree(sul: SulTree, objects: Iterable[int], lam: int = 256,
                  measure: bool = False) -> ColTree:
    """Compact ``sul`` over ``objects``.

    A SUL node holding at most ``lam`` objects (or a SUL leaf) becomes a leaf;
    a node whose objects all fall into one child is skipped in favour of
    that child. ``measure`` counts list lookups and sort comparisons into
    ``tree.build_work``.
    """
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    t0 = time.perf_counter()
    objs = sorted(set(int(p) for p in objects))
    for p in objs:
        if not 0 <= p < sul.n:
            raise ValueError(f"object id {p} out of range")
    work = {"sdl_lookups": 0, "sort_comparisons": 0}
    box = [0]
    nodes: List[ColNode] = []
    if not objs:
        tree = ColTree(sul, lam, nodes, -1, 0)
        tree.build_work = work if measure else None
        return tree

    rank = sul.rank
    store = sul.store
    n = sul.n
    m_root = len(sul.root.landmarks)

    def make(sid: int, members: list) -> int:
        # members: internal ids inside SUL node sid
        while True:
            snode = sul.nodes[sid]
            if snode.is_leaf or len(members) <= lam:
                return make_leaf(sid, members)
            firsts = [sul.nodes[c].first for c in snode.children]
            groups = [[] for _ in snode.children]
            for vi in members:
                groups[bisect.bisect_right(firsts, vi) - 1].append(vi)
            nonempty = [(c, g) for c, g in zip(snode.children, groups) if g]
            if len(nonempty) == 1:
                sid, members = nonempty[0]
                continue
            kids = [make(c, g) for c, g in nonempty]
            return make_internal(sid, members, kids)

    def own_minmax(sid: int, members: list):
        snode = sul.nodes[sid]
        if snode.sdl_base < 0:
            sul.ensure_sdl(sid)
        lo, hi = [], []
        for j in range(len(snode.landmarks)):
            off = snode.sdl_base + j * snode.size - snode.first
            ds = [store[off + vi] for vi in members]
            work["sdl_lookups"] += len(ds)
            lo.append(min(ds))
            hi.append(max(ds))
        return lo, hi

    def make_internal(sid, members, kids) -> int:
        lo, hi = own_minmax(sid, members)
        rlo = [min(nodes[k].mr_minus[j] for k in kids) for j in range(m_root)]
        rhi = [max(nodes[k].mr_plus[j] for k in kids) for j in range(m_root)]
        nodes.append(ColNode(sid, sul.landmarks(sid), lo, hi, rlo, rhi, kids))
        return len(nodes) - 1

    def make_leaf(sid, members) -> int:
        snode = sul.nodes[sid]
        if snode.sdl_base < 0:
            sul.ensure_sdl(sid)
        originals = [sul.order[vi] for vi in members]
        dists, objs_, lo, hi = [], [], [], []
        for j in range(len(snode.landmarks)):
            off = snode.sdl_base + j * snode.size - snode.first
            pairs = [(store[off + vi], p) for vi, p in zip(members, originals)]
            work["sdl_lookups"] += len(pairs)
            if measure:
                pairs = [c.k for c in sorted((_Counted(x, box) for x in pairs))]
            else:
                pairs.sort()
            dists.append([d for d, _ in pairs])
            objs_.append([p for _, p in pairs])
            lo.append(pairs[0][0])
            hi.append(pairs[-1][0])
        rlo, rhi = [], []
        for j in range(m_root):
            ds = [store[j * n + vi] for vi in members]
            work["sdl_lookups"] += len(ds)
            rlo.append(min(ds))
            rhi.append(max(ds))
        nodes.append(ColNode(sid, sul.landmarks(sid), lo, hi, rlo, rhi, [], dists, objs_))
        return len(nodes) - 1

    root = make(0, sorted(rank[p] for p in objs))
    work["sort_comparisons"] = box[0]
    tree = ColTree(sul, lam, nodes, root, len(objs))
    tree.build_work = work if measure else None
    tree.build_seconds = time.perf_counter() - t0
    return tree


# ---- node bounds ---------------------------------------------------------

def landmark_node_lb(lb: int, ub: int, m_minus: int, m_plus: int) -> int:
    """Lower bound from one landmark whose distance to ``q`` lies in ``[lb, ub]``.

    With ``lb == ub`` (an exact landmark distance) this is the plain
    interval-distance bound.
    """
    if lb >= m_plus:
        return lb - m_plus
    if ub <= m_minus:
        return m_minus - ub
    return 0


def node_lower_bound(node: ColNode, query_lb_ub, query_root) -> int:
    """Best lower bound on ``d(q, p)`` for every object ``p`` under ``node``.

    ``query_lb_ub[j]`` bounds ``d(landmark j, q)``; ``query_root[i]`` is the
    exact ``d(root landmark i, q)``.
    """
    best = 0
    for (lb, ub), lo, hi in zip(query_lb_ub, node.m_minus, node.m_plus):
        if lb >= hi:
            t = lb - hi
        elif ub <= lo:
            t = lo - ub
        else:
            continue
        if t > best:
            best = t
    for x, lo, hi in zip(query_root, node.mr_minus, node.mr_plus):
        if x >= hi:
            t = x - hi
        elif x <= lo:
            t = lo - x
        else:
            continue
        if t > best:
            best = t
    return best


def node_upper_bound(node: ColNode, query_ub, query_root) -> int:
    """Best upper bound on ``d(q, p)`` for every object ``p`` under ``node``.

    Uses ``UB(l, q) + M+`` for the node's own landmarks (the exact landmark
    distance is not known below the root) and ``d(l_R, q) + M+_R`` for root
    landmarks.
    """
    best = min(u + hi for u, hi in zip(query_ub, node.m_plus)) if query_ub else None
    r = min(x + hi for x, hi in zip(query_root, node.mr_plus)) if query_root else None
    if best is None:
        return r
    return best if r is None or best < r else r


def odl_min_index(dists, target) -> int:
    """Index of the entry closest to ``target``; ties go to the smaller index."""
    if not dists:
        raise ValueError("empty object distance list")
    i = bisect.bisect_left(dists, target)
    if i == 0:
        return 0
    # equidistant neighbours resolve to the left one (its first duplicate)
    if i == len(dists) or target - dists[i - 1] <= dists[i] - target:
        return bisect.bisect_left(dists, dists[i - 1])
    return i


# ---- object files --------------------------------------------------------

def read_objects(stream: TextIO) -> List[int]:
    out = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise ValueError(f"line {lineno}: bad object id {line!r}") from None
    return out


def write_objects(objects: Iterable[int], stream: TextIO) -> None:
    for p in objects:
        stream.write(f"{p}\n")
