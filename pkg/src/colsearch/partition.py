"""Balanced recursive b-way partitioning.

Coordinate bisection when the graph is embedded, BFS region growing when it
is not. Both are deterministic. ``b`` must be a power of two.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from .graph import RoadGraph


class PartitionError(ValueError):
    pass


def _check_b(b: int) -> None:
    if b < 2 or b & (b - 1):
        raise PartitionError("b must be a power of two")


def partition_subgraph(graph: RoadGraph, subset: Sequence[int], b: int) -> List[int]:
    """Split ``subset`` into ``b`` parts; returns ``part_of`` aligned with ``subset``."""
    _check_b(b)
    subset = list(subset)
    if len(subset) < b:
        raise PartitionError(f"subset of size {len(subset)} cannot be split into {b} parts")
    if graph.coords is not None:
        groups = _coordinate_bisection(graph, subset, b)
    else:
        groups = _region_growing(graph, subset, b)
    part_of = {}
    for i, grp in enumerate(groups):
        for v in grp:
            part_of[v] = i
    return [part_of[v] for v in subset]


def _coordinate_bisection(graph: RoadGraph, subset: list, b: int) -> list:
    xy = graph.coords
    groups = [subset]
    while len(groups) < b:
        nxt = []
        for grp in groups:
            xs = [xy[v, 0] for v in grp]
            ys = [xy[v, 1] for v in grp]
            axis = 0 if (max(xs) - min(xs)) >= (max(ys) - min(ys)) else 1
            other = 1 - axis
            ordered = sorted(grp, key=lambda v: (xy[v, axis], xy[v, other], v))
            half = (len(ordered) + 1) // 2
            nxt.append(ordered[:half])
            nxt.append(ordered[half:])
        groups = nxt
    return groups


def _region_growing(graph: RoadGraph, subset: list, b: int) -> list:
    inside = set(subset)
    adj = graph.adj
    cap = math.ceil(len(subset) / b)

    def hops_from(src):
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for v, _ in adj[u]:
                if v in inside and v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        return dist

    ordered = sorted(subset)
    seeds = [ordered[0]]
    near = {v: math.inf for v in ordered}
    while len(seeds) < b:
        h = hops_from(seeds[-1])
        for v in ordered:
            near[v] = min(near[v], h.get(v, math.inf))
        seeds.append(max((v for v in ordered if v not in seeds),
                         key=lambda v: (near[v], -v)))

    owner = {s: i for i, s in enumerate(seeds)}
    sizes = [1] * b
    fronts = [deque([s]) for s in seeds]
    active = True
    while active:
        active = False
        for i in range(b):
            if sizes[i] >= cap:
                continue
            fr = fronts[i]
            grown = False
            while fr and not grown:
                u = fr[0]
                for v, _ in adj[u]:
                    if v in inside and v not in owner:
                        owner[v] = i
                        sizes[i] += 1
                        fr.append(v)
                        grown = True
                        break
                else:
                    fr.popleft()
            active = active or grown
    for v in ordered:
        if v not in owner:
            i = min(range(b), key=lambda j: (sizes[j], j))
            owner[v] = i
            sizes[i] += 1
    groups = [[] for _ in range(b)]
    for v in ordered:
        groups[owner[v]].append(v)
    return groups


@dataclass
class PartitionNode:
    vertices: list
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)


Partitioner = Callable[[RoadGraph, Sequence[int], int], List[int]]


def recursive_partition(graph: RoadGraph, b: int, alpha: int,
                        partitioner: Optional[Partitioner] = None) -> PartitionNode:
    """Partition the whole graph until every leaf has at most ``alpha`` vertices."""
    _check_b(b)
    if alpha < b:
        raise PartitionError("alpha must be >= b")
    split = partitioner or partition_subgraph
    root = PartitionNode(list(range(graph.n)))
    stack = [root]
    while stack:
        node = stack.pop()
        if len(node.vertices) <= alpha:
            continue
        part_of = split(graph, node.vertices, b)
        groups = [[] for _ in range(b)]
        for v, p in zip(node.vertices, part_of):
            groups[p].append(v)
        node.children = [PartitionNode(sorted(g)) for g in groups]
        stack.extend(node.children)
    return root
