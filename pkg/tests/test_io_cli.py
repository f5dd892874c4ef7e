import io as stdio

import numpy as np
import pytest

from lingdist import io
from lingdist.cli import main
from lingdist.composite import ModalityWeights
from lingdist.errors import CycleDetected, ParseError, RaggedRows
from lingdist.genetic import EmbeddingTable
from lingdist.geo import GeoPoint

from conftest import LANGS


def run(*argv):
    buf = stdio.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def data_flags(d, islands=True, embeddings=True):
    flags = ["--speakers", d / "speakers.csv", "--features", d / "features.csv"]
    if islands:
        flags += ["--islands", d / "islands.json"]
    if embeddings:
        flags += ["--embeddings", d / "emb.txt"]
    return flags


def build_all(d):
    code, _ = run("train-genetic", "--tree", d / "tree.csv", "--out", d / "emb.txt",
                  "--dim", 2, "--epochs", 20, "--seed", 3)
    assert code == 0
    code, _ = run("build-islands", "--features", d / "features.csv", "--out", d / "islands.json", "--seed", 3)
    assert code == 0


class TestReaders:
    def test_speakers(self, dataset):
        langs = io.load_speakers(dataset / "speakers.csv")
        assert list(langs) == LANGS
        assert langs["ita"].as_dict() == {GeoPoint(41.9, 12.5): 0.625, GeoPoint(45.5, 9.2): 0.375}

    def test_speakers_bad_latitude(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("lang_id,location_id,lat,lon,l1_count\na,x,10,10,5\na,y,95,0,3\n")
        with pytest.raises(ParseError) as info:
            io.load_speakers(p)
        assert ":3:" in str(info.value)

    def test_speakers_all_zero_skipped(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("lang_id\tlocation_id\tlat\tlon\tl1_count\na\tx\t10\t10\t0\nb\ty\t0\t0\t4\n")
        skipped = []
        assert list(io.load_speakers(p, skipped)) == ["b"]
        assert skipped == ["a"]

    def test_tree_cycle(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("parent_id,child_id\na,b\nb,a\n")
        with pytest.raises(CycleDetected):
            io.load_tree(p)

    def test_features_bad_cell(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("lang_id,f1,f2\na,0,1\nb,1,x\n")
        with pytest.raises(ParseError):
            io.load_features(p)

    def test_features_ragged(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("lang_id,f1,f2\na,0,1\nb,1\n")
        with pytest.raises(RaggedRows):
            io.load_features(p)

    def test_semicolon_delimiter(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("lang_id;f1;f2\na;0;?\nb;1;1\n")
        m = io.load_features(p)
        assert m.values.tolist() == [[0, -1], [1, 1]]


class TestRoundTrips:
    def test_embeddings(self, tmp_path):
        rng = np.random.default_rng(0)
        coords = rng.normal(size=(3, 2)) / 7
        table = EmbeddingTable("poincare", 2, ["a", "b", "c"], coords, d_max=1 / 3)
        io.save_embeddings(tmp_path / "e.txt", table)
        again = io.load_embeddings(tmp_path / "e.txt")
        np.testing.assert_array_equal(again.coords, coords)
        assert again.d_max == 1 / 3
        assert again.nodes == ["a", "b", "c"]

    def test_features(self, dataset, tmp_path):
        m = io.load_features(dataset / "features.csv")
        io.save_features(tmp_path / "f2.csv", m)
        assert (tmp_path / "f2.csv").read_text() == (dataset / "features.csv").read_text()

    def test_weights(self, tmp_path):
        w = ModalityWeights.of(0.1, 0.2, 0.7)
        io.save_weights(tmp_path / "w.txt", w)
        assert io.load_weights(tmp_path / "w.txt") == w

    def test_matrix_with_missing(self, tmp_path):
        vals = np.array([[0.1, np.nan], [1 / 3, 0.0]])
        io.save_labeled_matrix(tmp_path / "m.csv", ["x", "y"], ["p", "q"], vals)
        rows, cols, again = io.load_labeled_matrix(tmp_path / "m.csv")
        assert (rows, cols) == (["x", "y"], ["p", "q"])
        np.testing.assert_array_equal(again, vals)

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        io.atomic_write(tmp_path / "x.txt", "hello\n")
        assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


class TestCLI:
    def test_dist_geo(self, dataset):
        code, out = run("dist", "--modality", "geo", "--a", "ita", "--b", "ita",
                        "--speakers", dataset / "speakers.csv")
        assert (code, out) == (0, "0.000000\n")

    def test_composite_is_mean(self, dataset):
        build_all(dataset)
        values = {}
        for mod in ("geo", "gen", "typ", "composite"):
            code, out = run("dist", "--modality", mod, "--a", "ita", "--b", "deu", *data_flags(dataset))
            assert code == 0, out
            values[mod] = float(out)
        assert values["composite"] == pytest.approx(np.mean([values[m] for m in ("geo", "gen", "typ")]), abs=2e-6)

    def test_unknown_language_is_data_error(self, dataset):
        code, _ = run("dist", "--modality", "geo", "--a", "ita", "--b", "xxx",
                      "--speakers", dataset / "speakers.csv")
        assert code == 2

    def test_missing_flag_is_usage_error(self, dataset):
        assert run("dist", "--modality", "gen", "--a", "ita", "--b", "spa")[0] == 1
        assert run("nonsense")[0] == 1
        assert run("train-genetic", "--tree", dataset / "tree.csv", "--out", dataset / "e.txt", "--dim", 0)[0] == 1

    def test_missing_file_is_data_error(self, dataset):
        assert run("eval-recon", "--embeddings", dataset / "nope.txt", "--tree", dataset / "tree.csv")[0] == 2

    def test_bad_env_seed(self, dataset, monkeypatch):
        monkeypatch.setenv("LINGDIST_SEED", "abc")
        code, _ = run("build-islands", "--features", dataset / "features.csv", "--out", dataset / "i.json")
        assert code == 1

    def test_env_seed_matches_flag(self, dataset, monkeypatch):
        monkeypatch.setenv("LINGDIST_SEED", "7")
        run("build-islands", "--features", dataset / "features.csv", "--out", dataset / "a.json")
        monkeypatch.delenv("LINGDIST_SEED")
        run("build-islands", "--features", dataset / "features.csv", "--out", dataset / "b.json", "--seed", 7)
        assert (dataset / "a.json").read_bytes() == (dataset / "b.json").read_bytes()

    def test_matrix_threads_agree(self, dataset):
        build_all(dataset)
        outs = []
        for threads in (1, 3):
            target = dataset / f"m{threads}.csv"
            code, _ = run("matrix", "--modality", "composite", "--langs", ",".join(LANGS), "--out", target,
                          "--threads", threads, *data_flags(dataset))
            assert code == 0
            outs.append(target.read_bytes())
        assert outs[0] == outs[1]
        rows, cols, vals = io.load_labeled_matrix(dataset / "m1.csv")
        assert rows == cols == LANGS
        np.testing.assert_array_equal(vals, vals.T)
        assert np.all(np.diag(vals) == 0)

    def test_langs_from_file(self, dataset):
        (dataset / "langs.txt").write_text("ita\nspa\n\n")
        code, _ = run("matrix", "--modality", "geo", "--langs", f"@{dataset / 'langs.txt'}",
                      "--out", dataset / "m.csv", "--speakers", dataset / "speakers.csv")
        assert code == 0
        assert io.load_labeled_matrix(dataset / "m.csv")[0] == ["ita", "spa"]

    def test_eval_recon(self, dataset):
        build_all(dataset)
        code, out = run("eval-recon", "--embeddings", dataset / "emb.txt", "--tree", dataset / "tree.csv")
        assert code == 0
        mr_line, map_line = out.splitlines()
        assert mr_line.startswith("MR=") and map_line.startswith("MAP=")
        assert 1.0 <= float(mr_line[3:]) and 0.0 < float(map_line[4:]) <= 1.0

    def test_fit_weights(self, dataset):
        rng = np.random.default_rng(0)
        lines = ["d_geo,d_gen,d_typ,loss"]
        for g, n, t in rng.random((10, 3)).tolist():
            lines.append(f"{g!r},{n!r},{t!r},{g!r}")
        (dataset / "rows.csv").write_text("\n".join(lines) + "\n")
        code, out = run("fit-weights", "--rows", dataset / "rows.csv", "--out", dataset / "w.txt", "--transform", "relu")
        assert code == 0
        w = io.load_weights(dataset / "w.txt")
        assert w["geo"] == pytest.approx(1.0, abs=1e-9)

    def test_select(self, dataset):
        langs = ["a", "b", "c"]
        io.save_labeled_matrix(dataset / "scores.csv", langs, langs,
                               np.array([[np.nan, 0.7, 1.0], [0.5, np.nan, 0.4], [0.9, 0.2, np.nan]]))
        dist = np.array([[0, 0.1, 0.2], [0.3, 0, 0.4], [0.1, 0.6, 0]])
        io.save_labeled_matrix(dataset / "d.csv", langs, langs, dist)
        code, out = run("select", "--scores", dataset / "scores.csv", "--distances", dataset / "d.csv")
        assert code == 0
        assert out.splitlines()[-1] == "mean_loss_pct=10.000000"

    def test_select_needs_one_source(self, dataset):
        io.save_labeled_matrix(dataset / "scores.csv", ["a"], ["a"], np.array([[1.0]]))
        assert run("select", "--scores", dataset / "scores.csv")[0] == 1


class TestSpecExamples:
    def test_non_contiguous_language_rows(self, dataset, tmp_path):
        text = (dataset / "speakers.csv").read_text().splitlines()
        header, rows = text[0], text[1:]
        shuffled = [rows[i] for i in (0, 2, 4, 1, 3, 5, 6)]
        (tmp_path / "s2.csv").write_text("\n".join([header, *shuffled]) + "\n")
        a = io.load_speakers(dataset / "speakers.csv")
        b = io.load_speakers(tmp_path / "s2.csv")
        assert {k: v.as_dict() for k, v in a.items()} == {k: v.as_dict() for k, v in b.items()}

    def test_chain_file(self, tmp_path):
        (tmp_path / "t.csv").write_text("parent_id,child_id\na,b\nb,c\nc,d\n")
        g = io.load_tree(tmp_path / "t.csv")
        assert (len(g.nodes), len(g.edges)) == (4, 3)

    def test_missingness_rate(self, tmp_path):
        (tmp_path / "f.csv").write_text("lang_id,f1,f2,f3,f4\na,0,1,?,1\nb,1,1,0,0\nc,?,0,1,1\n")
        assert io.load_features(tmp_path / "f.csv").missing_rate == 2 / 12

    def test_unknown_id_is_named(self, dataset, capsys):
        code, _ = run("dist", "--modality", "geo", "--a", "ita", "--b", "qqq",
                      "--speakers", dataset / "speakers.csv")
        assert code == 2
        assert "qqq" in capsys.readouterr().err

    def test_usage_error_names_flag(self, capsys):
        assert run("dist", "--modality", "geo", "--a", "x")[0] == 1
        err = capsys.readouterr().err
        assert "--b" in err and "usage: lingdist dist" in err

    def test_eval_recon_perfect(self, tmp_path):
        (tmp_path / "t.csv").write_text("parent_id,child_id\na,b\nb,c\n")
        table = EmbeddingTable("euclidean", 1, ["a", "b", "c"], np.array([[0.0], [1.0], [2.0]]), d_max=2.0)
        io.save_embeddings(tmp_path / "e.txt", table)
        code, out = run("eval-recon", "--embeddings", tmp_path / "e.txt", "--tree", tmp_path / "t.csv")
        assert code == 0
        assert out.splitlines()[1] == "MAP=1.000000"

    def test_large_tree_loads(self, tmp_path):
        from lingdist.genetic import build_closure

        rng = np.random.default_rng(0)
        n = 26223
        parents = [int(rng.integers(max(0, i - 200), i)) for i in range(1, n)]
        lines = ["parent_id,child_id"] + [f"g{p},g{i}" for i, p in enumerate(parents, start=1)]
        (tmp_path / "big.csv").write_text("\n".join(lines) + "\n")
        g = io.load_tree(tmp_path / "big.csv")
        assert len(g.nodes) == n
        assert len(build_closure(g).nodes) == n
