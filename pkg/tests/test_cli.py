import csv
import io
import json
import os

import numpy as np
import pytest

from hilltails.cli import (TAIL_COLUMNS, ConfigError, Table, atomic_write, build_config, load_samples, main,
                           read_config_file, render_csv, save_samples)


def _csv_rows(text):
    body = "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))
    return list(csv.reader(io.StringIO(body)))


def _meta(text):
    return {line[2:].split("=", 1)[0]: json.loads(line[2:].split("=", 1)[1])
            for line in text.splitlines() if line.startswith("# ")}


class TestCommands:
    def test_tails_grid(self, capsys):
        assert main(["tails", "--mu-grid", "100:2500:5"]) == 0
        out = capsys.readouterr().out
        rows = _csv_rows(out)
        assert rows[0] == TAIL_COLUMNS
        assert len(rows) == 6 and all(len(r) == 8 for r in rows)
        assert [float(r[0]) for r in rows[1:]] == [100.0, 700.0, 1300.0, 1900.0, 2500.0]
        assert _meta(out)["config"]["mu_grid"] == [100.0, 2500.0, 5]

    def test_ratefn(self, capsys):
        assert main(["ratefn", "--a", "10"]) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert len(rows) == 2
        rec = dict(zip(rows[0], rows[1]))
        assert float(rec["I_star"]) <= 8 / 3

    def test_lame_numeric(self, capsys):
        assert main(["lame", "--mu", "100", "--numeric"]) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert len(rows) == 6
        assert all(float(r[3]) <= 1e-4 for r in rows[1:])

    def test_discriminant_json(self, capsys):
        assert main(["discriminant", "--mu", "100", "--lambda-grid", "10:600:7", "--format", "json"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["columns"] == ["lambda", "delta_ode", "delta_hochstadt", "band_flag"]
        assert len(obj["rows"]) == 7 and obj["checks"]["disc_rel"] is True
        assert obj["config"]["mu"] == 100.0

    def test_mc_path_json(self, capsys):
        assert main(["mc-path", "--mu", "0", "--samples", "4000", "--n", "256", "--seed", "2",
                     "--format", "json"]) == 0
        obj = json.loads(capsys.readouterr().out)
        for key in ("estimate", "stderr", "count", "seed", "n"):
            assert key in obj
        assert obj["seed"] == 2 and obj["count"] == 4000

    def test_mc_direct_archive(self, tmp_path, capsys):
        arc = tmp_path / "s.bin"
        assert main(["mc-direct", "--mu-window", "-3:3", "--samples", "2000", "--n", "256",
                     "--save-samples", str(arc), "--format", "json"]) == 0
        obj = json.loads(capsys.readouterr().out)
        v = load_samples(str(arc))
        assert v.shape == (2000,) and obj["count"] == 2000
        side = json.loads((tmp_path / "s.bin.json").read_text())
        assert side["seed"] == 0 and side["dtype"] == "<f8"
        assert sum(obj["bins"]["masses"]) == pytest.approx(np.mean((v >= -3) & (v <= 3)))

    def test_mc_direct_empty_window_fails(self, capsys):
        assert main(["mc-direct", "--mu-window", "20:30", "--samples", "1000", "--n", "256"]) == 1


class TestValidation:
    @pytest.mark.parametrize("argv", [
        ["mc-path", "--mu", "5"],
        ["tails", "--mu-grid", "10:100:3"],
        ["tails", "--mu-grid", "100:50:3"],
        ["ratefn", "--a", "-1"],
        ["mc-direct", "--n", "64"],
        ["lame", "--mu", "400", "--numeric", "--n", "128"],
        ["ratefn", "--seed", "-3"],
        ["ratefn", "--a", "ten"],
    ])
    def test_precondition_exit_code(self, argv, capsys):
        assert main(argv) == 2
        assert "hilltails" in capsys.readouterr().err

    def test_message_names_precondition(self, capsys):
        main(["mc-path", "--mu", "5"])
        assert "-2 <= mu <= 2.5" in capsys.readouterr().err

    def test_numeric_error_exit_code(self, capsys):
        # mu below the elliptic threshold 4 pi^2: the module error propagates
        assert main(["lame", "--mu", "20"]) == 3
        assert "mu" in capsys.readouterr().err


class TestConfig:
    def test_precedence(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("# comment\nmu = 1.5\nsamples = 10 # trailing\nseed = 4\n")
        vals = read_config_file(str(f))
        cfg = build_config("mc-path", {"mu": "-1"}, vals)
        assert cfg.params["mu"] == -1.0          # flag beats file
        assert cfg.params["samples"] == 10        # file beats default
        assert cfg.params["n"] == 1024            # default
        assert cfg.seed == 4

    def test_dashed_keys(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("mu-grid = 100:400:2\n")
        cfg = build_config("tails", {}, read_config_file(str(f)))
        assert cfg.params["mu_grid"] == (100.0, 400.0, 2)

    def test_unknown_key(self, tmp_path, capsys):
        f = tmp_path / "c.cfg"
        f.write_text("mu = 1\ncolour = blue\n")
        with pytest.raises(ConfigError, match="colour"):
            build_config("mc-path", {}, read_config_file(str(f)))
        assert main(["mc-path", "--config", str(f)]) == 2

    def test_bad_line(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("just words\n")
        with pytest.raises(ConfigError):
            read_config_file(str(f))

    def test_config_file_run(self, tmp_path, capsys):
        f = tmp_path / "c.cfg"
        f.write_text("a = 5\nn = 256\nformat = json\n")
        assert main(["ratefn", "--config", str(f)]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["config"]["a"] == 5.0 and obj["config"]["n"] == 256


class TestOutput:
    def test_atomic_write(self, tmp_path):
        p = tmp_path / "sub" / "x.txt"
        atomic_write(str(p), "one")
        atomic_write(str(p), "two")
        assert p.read_text() == "two"
        assert sorted(os.listdir(p.parent)) == ["x.txt"]

    def test_atomic_write_failure_leaves_target(self, tmp_path):
        p = tmp_path / "x.txt"
        atomic_write(str(p), "keep")
        with pytest.raises(TypeError):
            atomic_write(str(p), object())
        assert p.read_text() == "keep"
        assert os.listdir(tmp_path) == ["x.txt"]

    def test_csv_format(self):
        text = render_csv(Table(["a", "b"], [[1.5, "x,y"]]), {"config": {"k": 1}})
        lines = text.split("\r\n")
        assert lines[0] == '# config={"k": 1}'
        assert lines[1] == "a,b" and lines[2] == '1.5,"x,y"'

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        assert main(["ratefn", "--a", "5", "--n", "256", "--out", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert "# config=" in out.read_text()

    def test_sample_archive_round_trip(self, tmp_path):
        v = np.random.default_rng(0).standard_normal(37)
        save_samples(str(tmp_path / "a.bin"), v, {"seed": 1})
        np.testing.assert_array_equal(load_samples(str(tmp_path / "a.bin")), v)
        assert (tmp_path / "a.bin").stat().st_size == 37 * 8


@pytest.mark.slow
class TestReport:
    @pytest.fixture(scope="class")
    @classmethod
    def runs(cls, tmp_path_factory):
        out = []
        for name in ("a", "b"):
            d = tmp_path_factory.mktemp(name)
            code = main(["report", "--quick", "--seed", "7", "--out", str(d)])
            out.append((code, d))
        return out

    def test_byte_identical(self, runs):
        (ca, a), (cb, b) = runs
        assert ca == cb
        names = sorted(os.listdir(a))
        assert names == sorted(os.listdir(b))
        assert {"tails.csv", "left_tail.csv", "identities.json", "manifest.json"} <= set(names)
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes(), n

    def test_bundle_contents(self, runs):
        code, d = runs[0]
        m = json.loads((d / "manifest.json").read_text())
        assert m["seed"] == 7 and "tolerances" in m
        assert code == (0 if m["passed"] else 1)
        ident = json.loads((d / "identities.json").read_text())
        assert len(ident["check_discrete_rice"]) == 9
        for r in ident["check_discrete_rice"]:
            assert r["abs_diff"] <= 1e-14 and r["lhs"] == r["rhs"]
        assert "# config=" in (d / "tails.csv").read_text()
