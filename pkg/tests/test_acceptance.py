"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Lines are collected in ``RESULTS`` and echoed in the terminal summary by
``conftest.py``. Run standalone with ``python3 tests/test_acceptance.py``.
"""

import os
import random
import statistics
import sys
import time

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra as sp_dijkstra

sys.path.insert(0, os.path.dirname(__file__))

from colsearch.baselines import aub_kfn, build_strtree, ier  # noqa: E402
from colsearch.bench import (ExperimentSpec, generate_objects, generate_query_set,  # noqa: E402
                             rows_to_csv, run_experiment, strip_time_columns)
from colsearch.cli import main as cli_main  # noqa: E402
from colsearch.coltree import ColTree, build_coltree  # noqa: E402
from colsearch.distoracle import CachedSourceDijkstra, DistanceTable  # noqa: E402
from colsearch.graph import (BorderContext, approximate_diameter,  # noqa: E402
                             border_restricted_dijkstra, dijkstra, subgraph_dijkstra)
from colsearch.query import Aggregate, aknn, kfn, knn, node_bounds, range_query  # noqa: E402
from colsearch.sultree import SulTree, build_sultree  # noqa: E402
from colsearch.synthetic import grid_graph, planar_graph  # noqa: E402

from oracles import aknn_oracle, kfn_oracle, range_oracle  # noqa: E402

RESULTS = {}

pytestmark = pytest.mark.slow


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[num] = line
    print(line)
    return ok


def _desk_graph(i):
    """Graph ``i`` of the 20-graph corpus: even ids are 50x50 grids, odd ids planar."""
    if i % 2 == 0:
        return grid_graph(50, 50, seed=100 + i)
    return planar_graph(2500, seed=100 + i)


@pytest.fixture(scope="module")
def big_grid():
    """200x200 grid with a SUL-Tree at the default build parameters."""
    g = grid_graph(200, 200, seed=0)
    sul = build_sultree(g, b=8, alpha=1024, m=2, m_root=16, policy="random", seed=0)
    return g, sul, CachedSourceDijkstra(g, capacity=64)


# ---- 1 --------------------------------------------------------------------------

def test_criterion_1_oracle_exactness():
    t0 = time.perf_counter()
    rng = random.Random(1)
    queries = mismatches = 0
    first_bad = None
    for gi in range(20):
        g = _desk_graph(gi)
        sul = build_sultree(g, b=4, alpha=64, m=2, m_root=8, seed=gi)
        be = DistanceTable(g)
        D = be.table
        # the oracle table comes from scipy; spot check it against the package Dijkstra
        for s in rng.sample(range(g.n), 2):
            assert D[s].tolist() == dijkstra(g, s)
        diam = approximate_diameter(g)
        for d in (0.01, 0.001):
            for oi in range(20):
                objs = generate_objects(g, d, rng.randrange(1 << 30))
                col = build_coltree(sul, objs, lam=(2, 4, 256)[oi % 3])
                for i in range(50):
                    checks = []
                    Q = rng.sample(range(g.n), (2, 8)[i % 2])
                    agg = ("sum", "max")[(i // 2) % 2]
                    checks.append((("aknn", Q, agg), aknn(col, be, Q, 10, agg).items,
                                   aknn_oracle(D, objs, Q, 10, agg)))
                    q = rng.randrange(g.n)
                    k = (1, 10)[i % 2]
                    checks.append((("kfn", q, k), kfn(col, be, q, k).items,
                                   kfn_oracle(D, objs, q, k)))
                    r = (0.01, 0.025, 0.10)[i % 3] * diam
                    checks.append((("range", q, r), range_query(col, be, q, r).objects,
                                   range_oracle(D, objs, q, r)))
                    k = (1, 10)[(i // 2) % 2]
                    checks.append((("knn", q, k), knn(col, be, q, k).items,
                                   aknn_oracle(D, objs, [q], k, "max")))
                    for what, got, want in checks:
                        queries += 1
                        if got != want:
                            mismatches += 1
                            first_bad = first_bad or (gi, what, got, want)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 600
    report(1, ok, f"{queries} queries on 20 graphs, {mismatches} mismatches, {elapsed:.0f}s "
                  f"(budget 600s)")
    assert mismatches == 0, first_bad
    assert elapsed < 600


# ---- 2 --------------------------------------------------------------------------

def test_criterion_2_bound_sandwich():
    rng = random.Random(2)
    pairs = violations = 0
    for gi in range(4):
        g = _desk_graph(gi)
        D = DistanceTable(g).table
        sul = build_sultree(g, b=4, alpha=32, m=2, m_root=8, policy=("random", "slice")[gi % 2],
                            seed=gi)
        for lam in (2, 8):
            for _ in range(5):
                objs = rng.sample(range(g.n), rng.choice([10, 60, 250]))
                col = build_coltree(sul, objs, lam=lam)
                below = [col.objects_below(nid) for nid in range(len(col.nodes))]
                for _ in range(250):
                    q = rng.randrange(g.n)
                    nid = rng.randrange(len(col.nodes))
                    lb, ub = node_bounds(col, q, nid)
                    ds = D[q, below[nid]]
                    pairs += 1
                    if not (lb <= ds.min() and ub >= ds.max()):
                        violations += 1
    report(2, violations == 0, f"{pairs} (q, node) pairs, {violations} violations")
    assert pairs >= 10_000 and violations == 0


# ---- 3 --------------------------------------------------------------------------

def test_criterion_3_minimizers():
    rng = random.Random(3)
    instances = violations = 0
    g = _desk_graph(0)
    be = DistanceTable(g)
    sul = build_sultree(g, b=4, alpha=32, m=2, m_root=8, seed=3)
    while instances < 1000:
        objs = rng.sample(range(g.n), rng.choice([20, 80, 300]))
        col = build_coltree(sul, objs, lam=rng.choice([3, 8, 20]))
        for _ in range(10):
            agg = rng.choice(["sum", "max"])
            fn = Aggregate.parse(agg)
            Q = rng.sample(range(g.n), rng.choice([1, 2, 3, 4, 7, 8]))
            trace = {}
            aknn(col, be, Q, rng.choice([1, 5, 10]), agg, trace=trace)
            for leaf, j, consts, start in trace["leaf_inits"]:
                dists = col.nodes[leaf].odl_dist[j]
                vals = [fn(abs(c - dd) for c in consts) for dd in dists]
                instances += 1
                if vals[start] != min(vals):
                    violations += 1
    report(3, violations == 0, f"{instances} (leaf, Q) instances, {violations} violations")
    assert violations == 0


# ---- 4 --------------------------------------------------------------------------

def test_criterion_4_border_search():
    mismatched = 0
    restricted = plain = entries = 0
    for gi in range(10):
        g = grid_graph(30, 30, seed=gi) if gi % 2 == 0 else planar_graph(900, seed=gi)
        sul = build_sultree(g, b=4, alpha=32, m=2, m_root=8, seed=gi)
        gr = sul.graph_r
        root_rows = [sul.sdl_row(0, j) for j in range(len(sul.root_landmarks))]
        for nid, nd in enumerate(sul.nodes):
            if nid == 0:
                continue
            ctx = BorderContext.for_range(gr, nd.first, nd.last, root_rows)
            for lm in sul.landmarks(nid):
                lmr = sul.rank[lm]
                row, s = border_restricted_dijkstra(gr, lmr, nd.first, nd.last, ctx, root_rows)
                ref, p = subgraph_dijkstra(gr, lmr, nd.first, nd.last)
                mismatched += row != ref
                restricted += s
                plain += p
                entries += nd.size
    g_r, g_p = restricted / entries, plain / entries
    ok = mismatched == 0 and restricted < plain
    report(4, ok, f"10 graphs, {mismatched} list mismatches, settled {restricted} vs {plain} "
                  f"(gamma {g_p:.2f} -> {g_r:.2f}, {100 * (1 - restricted / plain):.1f}% fewer)")
    assert mismatched == 0 and restricted < plain


# ---- 5 --------------------------------------------------------------------------

def test_criterion_5_candidate_frugality(big_grid):
    g, sul, be = big_grid
    n_obj = len(generate_objects(g, 0.001, 0))
    cands, col_calls, ier_calls, wins, total = [], [], [], 0, 0
    for oi in range(5):
        objs = generate_objects(g, 0.001, 1000 + oi)
        col = build_coltree(sul, objs, lam=256)
        rt = build_strtree(objs, g.coords)
        for qi in range(10):
            Q = generate_query_set(g, 8, 15, 7919 * oi + qi)
            a = aknn(col, be, Q, 10, "max")
            b = ier("aknn", rt, g, be, queries=Q, k=10, agg="max")
            assert a.items == b.items
            cands.append(a.stats.candidates_retrieved)
            col_calls.append(a.stats.exact_distance_calls)
            ier_calls.append(b.stats.exact_distance_calls)
            wins += a.stats.exact_distance_calls <= b.stats.exact_distance_calls
            total += 1
    mc = statistics.fmean(cands)
    share = wins / total
    ok = mc < n_obj and share >= 0.8
    report(5, ok, f"|P|={n_obj}, mean candidates {mc:.1f}, mean calls coltree "
                  f"{statistics.fmean(col_calls):.1f} vs ier {statistics.fmean(ier_calls):.1f}, "
                  f"coltree <= ier on {100 * share:.0f}% of {total} queries")
    assert mc < n_obj and share >= 0.8


# ---- 6 --------------------------------------------------------------------------

def test_criterion_6_kfn_efficiency(big_grid):
    g, sul, be = big_grid
    summary = {}
    mismatches = 0
    for lam in (4, 256):
        col_c, aub_c, brute_c = [], [], []
        for oi in range(5):
            objs = generate_objects(g, 0.001, 2000 + oi)
            col = build_coltree(sul, objs, lam=lam)
            rng = random.Random(oi)
            for _ in range(20):
                q = rng.randrange(g.n)
                a = kfn(col, be, q, 10)
                b = aub_kfn(objs, sul, be, q, 10)
                want = kfn_oracle(row_oracle(g, q), objs, 0, 10)
                mismatches += (a.items != want) + (b.items != want)
                col_c.append(a.stats.exact_distance_calls)
                aub_c.append(b.stats.exact_distance_calls)
                brute_c.append(len(objs))
        summary[lam] = tuple(statistics.fmean(x) for x in (col_c, aub_c, brute_c))
    c, a, p = summary[4]
    ok = mismatches == 0 and c < 0.5 * p and c < a < p
    c256, a256, _ = summary[256]
    report(6, ok, f"|P|={p:.0f}, lambda=4: coltree {c:.1f} calls, aub {a:.1f}, brute {p:.0f}; "
                  f"lambda=256: coltree {c256:.1f}, aub {a256:.1f}; {mismatches} mismatches")
    assert mismatches == 0
    assert c < 0.5 * p and c < a < p


def row_oracle(g, q):
    """One-row distance matrix from ``q``, for the matrix-based oracles."""
    return np.rint(sp_dijkstra(g.to_scipy(), directed=False, indices=[q])).astype(np.int64)


# ---- 7 --------------------------------------------------------------------------

def test_criterion_7_complexity(big_grid):
    g, sul, _ = big_grid
    ratios = []
    for d in (0.001, 0.01, 0.02, 0.04):
        work = []
        for mult in (1, 2):
            objs = generate_objects(g, d * mult, 3000)
            col = build_coltree(sul, objs, lam=256, measure=True)
            work.append(col.build_work["sdl_lookups"] + col.build_work["sort_comparisons"])
        ratios.append(work[1] / work[0])
    expected = sum(len(nd.landmarks) * nd.size for nd in sul.nodes)
    entries = len(sul.store)
    # the id-free store keeps one 64-bit word per entry; a pair store in the same word
    # layout keeps (vertex id, distance), two words per entry
    idfree = entries * sul.store.itemsize
    pair = entries * 2 * sul.store.itemsize
    share = idfree / pair
    ok = max(ratios) <= 2.5 and entries == expected and share <= 0.55
    report(7, ok, f"build work ratios on doubling {', '.join(f'{r:.2f}' for r in ratios)}; "
                  f"store {entries} entries == {expected} expected; id-free/pair = "
                  f"{100 * share:.0f}% (with 32-bit ids {100 * 8 / 12:.0f}%)")
    assert max(ratios) <= 2.5 and entries == expected and share <= 0.55


# ---- 8 --------------------------------------------------------------------------

def test_criterion_8_serialization(tmp_path):
    rng = random.Random(8)
    configs = [
        ("grid", 20, 4, 16, 1, 4, "random", 2),
        ("planar", 500, 2, 20, 2, 3, "furthest", 5),
        ("grid", 35, 8, 64, 3, 8, "slice", 256),
        ("planar", 1200, 4, 40, 2, 16, "minmax", 16),
        ("grid", 12, 2, 8, 1, 1, "random", 1),
    ]
    same = 0
    for i, (kind, size, b, alpha, m, m_root, policy, lam) in enumerate(configs):
        g = grid_graph(size, size, seed=i) if kind == "grid" else planar_graph(size, seed=i)
        sul = build_sultree(g, b=b, alpha=alpha, m=m, m_root=m_root, policy=policy, seed=i)
        blob = sul.to_bytes()
        sul.save(tmp_path / f"{i}.sult")
        sul2 = SulTree.load(tmp_path / f"{i}.sult")
        objs = rng.sample(range(g.n), max(1, g.n // 10))
        col = build_coltree(sul, objs, lam=lam)
        cblob = col.to_bytes()
        col2 = ColTree.from_bytes(cblob, sul2)
        same += sul2.to_bytes() == blob and col2.to_bytes() == cblob
    report(8, same == 5, f"{same}/5 configurations byte-identical after a round trip")
    assert same == 5


# ---- 9 --------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    specs = {
        "aknn": "graph=grid:30x30\nkind=aknn\nk=5\ndensity=0.02\nnq=4\nlocality=15\n"
                "object_sets=3\nquery_sets=10\nmethods=coltree,brute,ier\nb=4\nalpha=32\n"
                "m_root=8\nlam=4\nseed=9\n",
        "kfn": "graph=planar:800\nkind=kfn\nk=3\ndensity=0.01\nobject_sets=3\nquery_sets=10\n"
               "methods=coltree,brute,aub,ier\nb=4\nalpha=32\nm_root=8\nlam=4\nseed=9\n",
        "range": "graph=grid:30x30\nkind=range\nradius=10\ndensity=0.05\nobject_sets=2\n"
                 "query_sets=10\nmethods=coltree,brute,ier\nb=4\nalpha=32\nm_root=8\n",
    }
    identical = 0
    for name, text in specs.items():
        spec_path = tmp_path / f"{name}.spec"
        spec_path.write_text(text)
        outs = []
        for run in range(2):
            out = tmp_path / f"{name}.{run}.csv"
            assert cli_main(["bench", "--spec", str(spec_path), "--out", str(out)]) == 0
            outs.append(strip_time_columns(out.read_text()))
        identical += outs[0] == outs[1]
    workers = ExperimentSpec.parse(specs["aknn"])
    workers.workers = 2
    sharded = strip_time_columns(rows_to_csv(run_experiment(workers)))
    sharded_ok = sharded == strip_time_columns((tmp_path / "aknn.0.csv").read_text())
    ok = identical == len(specs) and sharded_ok
    report(9, ok, f"{identical}/{len(specs)} specs identical across two runs modulo time "
                  f"columns; 2-worker run identical: {sharded_ok}")
    assert identical == len(specs) and sharded_ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
