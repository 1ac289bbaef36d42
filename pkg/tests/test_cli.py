import json

import pytest

from fairtail.cli import main, read_config_file
from fairtail.dataset import parse_interactions


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.tsv"
    rc = main(["synth", "--users", "60", "--items", "80", "--events", "30", "--exponent", "1.1",
               "--seed", "3", "--output-dir", str(tmp_path), "--output", "toy.tsv"])
    assert rc == 0
    return path


def read(path):
    return path.read_bytes()


class TestSynth:
    def test_round_trip(self, tmp_path):
        assert main(["synth", "--users", "10", "--items", "20", "--events", "50", "--exponent", "1.0",
                     "--seed", "7", "--output-dir", str(tmp_path)]) == 0
        recs = parse_interactions((tmp_path / "interactions.tsv").read_text())
        assert len({r.user for r in recs}) == 10

    def test_repeatable(self, tmp_path):
        args = ["synth", "--users", "10", "--items", "20", "--events", "50", "--seed", "7"]
        main(args + ["--output-dir", str(tmp_path / "a")])
        main(args + ["--output-dir", str(tmp_path / "b")])
        assert read(tmp_path / "a" / "interactions.tsv") == read(tmp_path / "b" / "interactions.tsv")

    def test_zero_events(self, tmp_path):
        assert main(["synth", "--users", "10", "--items", "20", "--events", "0",
                     "--output-dir", str(tmp_path)]) == 1
        assert not list(tmp_path.iterdir())

    def test_missing_param(self, tmp_path):
        assert main(["synth", "--users", "10", "--output-dir", str(tmp_path)]) == 1


class TestAudit:
    def test_repeatable_json(self, toy, tmp_path):
        args = ["audit", "--input", str(toy), "--algorithms", "mostpop,random", "--seed", "7"]
        assert main(args + ["--output-dir", str(tmp_path / "a")]) == 0
        assert main(args + ["--output-dir", str(tmp_path / "b")]) == 0
        assert read(tmp_path / "a" / "report.json") == read(tmp_path / "b" / "report.json")
        assert read(tmp_path / "a" / "report.csv") == read(tmp_path / "b" / "report.csv")

    def test_missing_input(self, tmp_path):
        out = tmp_path / "out"
        assert main(["audit", "--input", str(tmp_path / "nope.tsv"), "--output-dir", str(out)]) == 2
        assert not out.exists()

    def test_all_algorithms(self, toy, tmp_path, capsys):
        rc = main(["audit", "--input", str(toy), "--algorithms", "userknn,nmf,useritemavg,mostpop,random",
                   "--epochs", "10", "--output-dir", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "report.csv").read_text().splitlines()
        assert len(rows) == 1 + 15
        assert "Low-P" in capsys.readouterr().out

    def test_config_file_and_override(self, toy, tmp_path):
        cfg = tmp_path / "audit.conf"
        cfg.write_text("# settings\nalgorithms = mostpop, random\nseed = 5\nn = 4\nbeta1 = 0.25\n--exclude-seen = false\n")
        assert main(["audit", "--input", str(toy), "--config", str(cfg), "--n", "6",
                     "--output-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["config"]["algorithms"] == ["MostPop", "Random"]
        assert doc["config"]["seed"] == 5
        assert doc["config"]["n"] == 6
        assert doc["config"]["boundaries"] == [0.25, 0.7]
        assert doc["config"]["recommenders"][1]["exclude_seen"] is False

    def test_env_output_dir(self, toy, tmp_path, monkeypatch):
        monkeypatch.setenv("FAIRTAIL_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["audit", "--input", str(toy), "--algorithms", "mostpop"]) == 0
        assert (tmp_path / "env" / "report.json").exists()

    def test_provider_map(self, toy, tmp_path):
        items = {r.item for r in parse_interactions(toy.read_text())}
        pmap = tmp_path / "map.tsv"
        pmap.write_text("".join(f"{i}\tartist{int(i[1:]) % 25}\n" for i in sorted(items)))
        assert main(["audit", "--input", str(toy), "--provider-map", str(pmap), "--algorithms", "random",
                     "--output-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["config"]["provider_mode"] == "map"

    def test_unmapped_item(self, toy, tmp_path, capsys):
        pmap = tmp_path / "map.tsv"
        pmap.write_text("i0\tartist\n")
        assert main(["audit", "--input", str(toy), "--provider-map", str(pmap),
                     "--output-dir", str(tmp_path / "o")]) == 2
        assert "map.tsv" in capsys.readouterr().err

    def test_both_provider_modes(self, toy, tmp_path):
        assert main(["audit", "--input", str(toy), "--provider-map", str(toy), "--identity-providers",
                     "--output-dir", str(tmp_path)]) == 1

    def test_malformed_input_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("u1\ti1\t3\nu2\ti1\tlots\n")
        assert main(["audit", "--input", str(bad), "--output-dir", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "bad.tsv" in err and "line 2" in err
        assert not (tmp_path / "o").exists()

    @pytest.mark.parametrize("flag", [["--algorithms", "itemknn"], ["--n", "0"], ["--scaling", "zscore"],
                                      ["--beta1", "0.9"], ["--threads", "0"]])
    def test_invalid_settings(self, toy, tmp_path, flag):
        assert main(["audit", "--input", str(toy), "--output-dir", str(tmp_path / "o")] + flag) == 1
        assert not (tmp_path / "o").exists()

    def test_save_recommendations(self, toy, tmp_path):
        assert main(["audit", "--input", str(toy), "--algorithms", "mostpop", "--n", "3",
                     "--save-recommendations", "--output-dir", str(tmp_path)]) == 0
        lines = (tmp_path / "recommendations_mostpop.tsv").read_text().splitlines()
        assert len(lines) == 60 * 3
        assert lines[0].split("\t")[1] == "1"


class TestStats:
    def test_two_providers(self, tmp_path):
        data = tmp_path / "d.tsv"
        data.write_text("u1\ta1\t30\nu2\ta2\t10\n")
        assert main(["stats", "--input", str(data), "--output-dir", str(tmp_path)]) == 0
        assert (tmp_path / "popularity.csv").read_text() == (
            "rank,provider,count,share,cumulative_share\n1,a1,30,0.75,0.75\n2,a2,10,0.25,1.0\n"
        )

    def test_empty_file(self, tmp_path):
        data = tmp_path / "empty.tsv"
        data.write_text("")
        assert main(["stats", "--input", str(data), "--output-dir", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()

    def test_descending_counts(self, toy, tmp_path):
        assert main(["stats", "--input", str(toy), "--output-dir", str(tmp_path)]) == 0
        counts = [int(line.split(",")[2]) for line in (tmp_path / "popularity.csv").read_text().splitlines()[1:]]
        assert counts == sorted(counts, reverse=True)


class TestGroups:
    def test_hand_trace(self, tmp_path, capsys):
        data = tmp_path / "d.tsv"
        data.write_text("u\tp1\t5\nu\tp2\t3\nu\tp3\t1\nu\tp4\t1\n")
        assert main(["groups", "--input", str(data), "--beta1", "0.3", "--beta2", "0.8",
                     "--output-dir", str(tmp_path)]) == 0
        assert (tmp_path / "groups.csv").read_text() == (
            "provider,group\np1,High-P\np2,Mid-P\np3,Low-P\np4,Low-P\n"
        )
        out = capsys.readouterr().out.splitlines()
        assert [line.split("\t")[:2] for line in out] == [["High-P", "1"], ["Mid-P", "1"], ["Low-P", "2"]]

    def test_inverted_boundaries_in_config(self, toy, tmp_path):
        cfg = tmp_path / "c.conf"
        cfg.write_text("beta1 = 0.8\nbeta2 = 0.3\n")
        assert main(["groups", "--input", str(toy), "--config", str(cfg), "--output-dir", str(tmp_path / "o")]) == 1

    def test_single_provider(self, tmp_path):
        data = tmp_path / "d.tsv"
        data.write_text("u1\tonly\t4\nu2\tonly\t1\n")
        assert main(["groups", "--input", str(data), "--output-dir", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()


def test_config_syntax_error(tmp_path):
    cfg = tmp_path / "c.conf"
    cfg.write_text("seed 5\n")
    assert main(["stats", "--input", str(cfg), "--config", str(cfg)]) == 2


def test_read_config_file(tmp_path):
    cfg = tmp_path / "c.conf"
    cfg.write_text("# x\n\nexclude-seen = false\n--n = 3\nalgorithms = a, b\n")
    assert read_config_file(cfg) == {"exclude_seen": "false", "n": "3", "algorithms": "a, b"}


def test_usage_errors():
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["audit"]) == 1
