import json

import pytest

from colsearch import service
from colsearch.cli import main


@pytest.fixture
def files(tmp_path):
    sul = tmp_path / "g.sult"
    objs = tmp_path / "p.txt"
    col = tmp_path / "p.colt"
    qf = tmp_path / "q.txt"
    graph = "grid:10x10"
    assert main(["build-sultree", "--graph", graph, "--b", "4", "--alpha", "16", "--m-root", "4",
                 "--out", str(sul)]) == 0
    assert main(["gen-objects", "--graph", graph, "--density", "0.1", "--seed", "3",
                 "--out", str(objs)]) == 0
    assert main(["build-coltree", "--sultree", str(sul), "--objects", str(objs), "--lam", "4",
                 "--out", str(col)]) == 0
    qf.write_text("5 17\n# comment\n44\n")
    return dict(graph=graph, sul=str(sul), objs=str(objs), col=str(col), q=str(qf),
                tmp=tmp_path)


def _query(files, kind, *extra):
    return ["query", kind, "--graph", files["graph"], "--sultree", files["sul"],
            "--q-file", files["q"], *extra]


def test_query_kinds_and_verify(files, capsys):
    capsys.readouterr()
    assert main(_query(files, "aknn", "--coltree", files["col"], "--k", "3", "--agg", "sum",
                       "--verify", "--json")) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verified"] is True and len(out["items"]) == 3
    single = files["tmp"] / "one.txt"
    single.write_text("12\n")
    for kind, extra in [("knn", []), ("kfn", []), ("range", ["--radius", "4"])]:
        argv = ["query", kind, "--graph", files["graph"], "--sultree", files["sul"],
                "--q-file", str(single), "--objects", files["objs"], "--verify", *extra]
        assert main(argv) == 0
    for method in ("brute", "ier"):
        assert main(_query(files, "aknn", "--objects", files["objs"], "--method", method)) == 0


def test_usage_errors(files, tmp_path):
    assert main(_query(files, "range", "--coltree", files["col"])) == 1  # no radius
    assert main(_query(files, "kfn", "--coltree", files["col"])) == 1  # three query vertices
    assert main(_query(files, "knn", "--coltree", files["col"], "--method", "aub")) == 1
    assert main(_query(files, "aknn", "--coltree", files["col"], "--k", "0")) == 1
    assert main(["query", "aknn", "--q-file", files["q"], "--coltree", files["col"]]) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("1 x\n")
    assert main(["query", "aknn", "--graph", files["graph"], "--sultree", files["sul"],
                 "--q-file", str(bad), "--coltree", files["col"]]) == 1
    big = tmp_path / "big.txt"
    big.write_text("1000\n")
    assert main(["query", "aknn", "--graph", files["graph"], "--sultree", files["sul"],
                 "--q-file", str(big), "--coltree", files["col"]]) == 1
    assert main(["build-coltree", "--sultree", files["sul"], "--objects", str(big),
                 "--out", str(tmp_path / "x")]) == 1
    assert main(["build-sultree", "--graph", str(tmp_path / "missing.gr"),
                 "--out", str(tmp_path / "x")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["query", "nope"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_verify_mismatch_exits_2(files, monkeypatch):
    monkeypatch.setattr(service, "results_agree", lambda kind, a, b: False)
    assert main(_query(files, "aknn", "--coltree", files["col"], "--verify")) == 2


def test_ingest(tmp_path, capsys):
    (tmp_path / "a.gr").write_text("p sp 3 2\na 1 2 4\na 2 3 5\n")
    (tmp_path / "a.co").write_text("v 1 0 0\nv 2 4 0\nv 3 9 0\n")
    assert main(["ingest", str(tmp_path / "a.gr"), "--co", str(tmp_path / "a.co"),
                 "--out", str(tmp_path / "a.npz"), "--id-map", str(tmp_path / "map.txt")]) == 0
    assert (tmp_path / "map.txt").read_text() == "1 0\n2 1\n3 2\n"
    (tmp_path / "bad.gr").write_text("p sp 2 1\na 1 2 0\n")
    assert main(["ingest", str(tmp_path / "bad.gr"), "--out", str(tmp_path / "b.npz")]) == 1
    assert "non-positive weight" in capsys.readouterr().err


def test_bench(tmp_path, monkeypatch, capsys):
    spec = tmp_path / "s.txt"
    spec.write_text("graph=grid:10x10\nkind=knn\nk=2\ndensity=0.1\nobject_sets=2\n"
                    "query_sets=3\nb=4\nalpha=16\nm_root=4\nlam=4\ncheck_fraction=1\n")
    out = tmp_path / "r.csv"
    assert main(["bench", "--spec", str(spec), "--out", str(out)]) == 0
    assert out.read_text().startswith("method,kind,status")
    (tmp_path / "bad.txt").write_text("kind=rknn\n")
    assert main(["bench", "--spec", str(tmp_path / "bad.txt")]) == 1

    from colsearch import bench
    monkeypatch.setattr(bench, "_coltree_query",
                        lambda *a: (_ for _ in ()).throw(bench.OracleMismatch("forced")))
    assert main(["bench", "--spec", str(spec)]) == 2
