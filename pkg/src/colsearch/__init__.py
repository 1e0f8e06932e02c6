"""Hierarchical landmark indexes for exact object search on road networks."""

__version__ = "0.1.0"

from .graph import RoadGraph, GraphFormatError, UnsupportedOperation  # noqa: E402
from .sultree import SulTree, build_sultree  # noqa: E402
from .coltree import ColTree, build_coltree  # noqa: E402
from .query import Aggregate, QueryStats, ResultSet, aknn, kfn, knn, range_query  # noqa: E402

__all__ = [
    "RoadGraph", "GraphFormatError", "UnsupportedOperation", "SulTree", "build_sultree",
    "ColTree", "build_coltree", "Aggregate", "QueryStats", "ResultSet", "aknn", "kfn", "knn",
    "range_query", "__version__",
]
