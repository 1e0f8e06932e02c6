"""File loading helpers shared by the CLI, the service and the bench runner."""

from __future__ import annotations

import os
from typing import Optional

from .graph import RoadGraph, normalize, parse_dimacs_gr, read_coordinates


def ingest_dimacs(gr_path: str, co_path: Optional[str] = None) -> RoadGraph:
    with open(gr_path) as fh:
        parsed = parse_dimacs_gr(fh)
    if co_path:
        with open(co_path) as fh:
            parsed.coords = read_coordinates(fh, parsed.n)
    return normalize(parsed)


def load_graph(path: str) -> RoadGraph:
    if path.endswith(".npz"):
        return RoadGraph.load(path)
    if path.endswith(".gr"):
        co = path[:-3] + ".co"
        return ingest_dimacs(path, co if os.path.exists(co) else None)
    raise ValueError(f"unrecognized graph file {path!r} (expected .npz or .gr)")
