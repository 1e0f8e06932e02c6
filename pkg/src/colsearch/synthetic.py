"""Desk-scale synthetic road networks.

Weights are uniform random integers drawn independently of geometry, which
mimics travel-time graphs where Euclidean length is a poor proxy.
"""

from __future__ import annotations

import numpy as np

from .graph import RoadGraph, normalize


def grid_graph(width: int, height: int, seed: int = 0, wmin: int = 1, wmax: int = 1000,
               unit: bool = False) -> RoadGraph:
    """4-connected ``width`` x ``height`` grid with unit spacing."""
    rng = np.random.default_rng(seed)
    edges = []
    for y in range(height):
        for x in range(width):
            u = y * width + x
            if x + 1 < width:
                edges.append((u, u + 1))
            if y + 1 < height:
                edges.append((u, u + width))
    ws = np.ones(len(edges), dtype=np.int64) if unit else rng.integers(wmin, wmax + 1, len(edges))
    coords = np.array([(x, y) for y in range(height) for x in range(width)], dtype=np.float64)
    return RoadGraph.from_edges(width * height,
                                ((u, v, int(w)) for (u, v), w in zip(edges, ws)), coords)


def planar_graph(n: int, seed: int = 0, wmin: int = 1, wmax: int = 1000,
                 extent: float = 1000.0) -> RoadGraph:
    """Delaunay triangulation of ``n`` random points, random integer weights."""
    from scipy.spatial import Delaunay

    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2)) * extent
    tri = Delaunay(pts)
    pairs = set()
    for a, b, c in tri.simplices.tolist():
        for u, v in ((a, b), (b, c), (a, c)):
            pairs.add((u, v) if u < v else (v, u))
    pairs = sorted(pairs)
    ws = rng.integers(wmin, wmax + 1, len(pairs))
    g = RoadGraph.from_edges(n, ((u, v, int(w)) for (u, v), w in zip(pairs, ws)), pts)
    return normalize(g)


def path_graph(weights) -> RoadGraph:
    """Collinear path with unit spacing; ``weights[i]`` joins ``i`` and ``i+1``."""
    n = len(weights) + 1
    coords = np.array([(float(i), 0.0) for i in range(n)])
    return RoadGraph.from_edges(n, ((i, i + 1, int(w)) for i, w in enumerate(weights)), coords)


def make_graph(spec: str, seed: int = 0) -> RoadGraph:
    """``grid:WxH``, ``planar:N`` or a path to a ``.npz`` / ``.gr`` file."""
    kind, _, arg = spec.partition(":")
    if kind == "grid":
        w, _, h = arg.partition("x")
        return grid_graph(int(w), int(h or w), seed)
    if kind == "planar":
        return planar_graph(int(arg), seed)
    from .io import load_graph
    return load_graph(spec)
