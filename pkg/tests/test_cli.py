import csv
import io
import json

import pytest

from adaptfdr.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def three(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("0.001\n0.02\n0.8\n")
    return path


def test_adjust_ms(capsys, three):
    code, out, err = run(capsys, "adjust", three, "--procedure", "MS", "--q", 0.05)
    assert code == 0
    rows = read_rows(out)
    assert [r["rejected"] for r in rows] == ["1", "1", "0"]
    assert [r["rank"] for r in rows] == ["1", "2", "3"]
    assert "k=2" in err and "m=3" in err


def test_adjust_round_trip(capsys, tmp_path, three):
    out_path = tmp_path / "out.csv"
    for proc in ("MS", "BH", "TS", "STS", "PRDS"):
        assert main(["adjust", str(three), "--procedure", proc, "--out", str(out_path)]) == 0
        first = read_rows(out_path.read_text())
        again = tmp_path / "again.csv"
        assert main(["adjust", str(out_path), "--procedure", proc, "--out", str(again)]) == 0
        assert [r["rejected"] for r in read_rows(again.read_text())] == [r["rejected"] for r in first]
    capsys.readouterr()


def test_adjust_header_with_ids(capsys, tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("gene,p,id\nA,0.9,g1\nB,0.0001,g2\n")
    code, out, _ = run(capsys, "adjust", path, "--procedure", "ORC", "--m0", 1)
    assert code == 0
    rows = read_rows(out)
    assert [r["id"] for r in rows] == ["g1", "g2"]
    assert [r["rejected"] for r in rows] == ["0", "1"]


def test_adjust_empty(capsys, tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    code, out, err = run(capsys, "adjust", path)
    assert code == 0 and "k=0" in err


@pytest.mark.parametrize("content,line", [("0.1\n1.5\n", "line 2"), ("0.1\n\nabc\n", "line 3"),
                                          ("p\n0.1\n-0.2\n", "line 3")])
def test_adjust_malformed(capsys, tmp_path, content, line):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    code, _, err = run(capsys, "adjust", path)
    assert code == 2 and line in err


def test_adjust_missing_p_column(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("pval\n0.1\n")
    assert run(capsys, "adjust", path)[0] == 2


@pytest.mark.parametrize("args", [("--q", 1.5), ("--procedure", "STS", "--lambda", 1.0),
                                  ("--procedure", "ORC", "--m0", 9), ("--procedure", "ORC")])
def test_adjust_domain_errors(capsys, three, args):
    assert run(capsys, "adjust", three, *args)[0] == 3


def test_adjust_missing_file(capsys, tmp_path):
    assert run(capsys, "adjust", tmp_path / "nope.txt")[0] == 4


def test_adjust_structured(capsys, three):
    code, out, _ = run(capsys, "adjust", three, "--format", "structured")
    doc = json.loads(out)
    assert doc["summary"]["k"] == 2 and len(doc["hypotheses"]) == 3


def test_constants_ms(capsys):
    code, out, err = run(capsys, "constants", "--family", "ms", "--m", 5, "--q", 0.05)
    rows = read_rows(out)
    assert code == 0 and len(rows) == 5
    assert all(r["holds"] == "1" for r in rows)
    for r in rows:
        assert float(r["odds"]) == pytest.approx(float(r["bound"]), rel=1e-12)
    assert "condition_holds=True" in err


def test_constants_prds_and_bh(capsys):
    _, out, _ = run(capsys, "constants", "--family", "prds", "--m", 5, "--q", 0.05)
    assert float(read_rows(out)[-1]["alpha"]) == pytest.approx(0.05, rel=1e-12)
    _, out, _ = run(capsys, "constants", "--family", "bh", "--m", 5, "--q", 0.05)
    assert [float(r["alpha"]) for r in read_rows(out)] == pytest.approx([0.01, 0.02, 0.03, 0.04, 0.05])


def test_constants_invalid(capsys):
    assert run(capsys, "constants", "--m", 5, "--q", 1.2)[0] == 3
    assert run(capsys, "constants", "--m", 5, "--beta", 0.5)[0] == 3


def test_exact_fdr(capsys):
    code, out, _ = run(capsys, "exact-fdr", "--m", 1, "--q", 0.05)
    assert code == 0 and float(out) == pytest.approx(0.05 / 1.05, abs=1e-6)
    assert run(capsys, "exact-fdr", "--m", 4)[0] == 3


def test_simulate_smoke(capsys, tmp_path):
    out = tmp_path / "res.csv"
    code, stdout, _ = run(capsys, "simulate", "--preset", "smoke", "--out", out)
    assert code == 0
    assert "fdr_hat" in stdout and "MS" in stdout
    assert (tmp_path / "res.json").exists() and (tmp_path / "res.curves.csv").exists()
    rows = read_rows(out.read_text())
    assert rows[0]["fdr_se"] == "NA"


def test_simulate_config_and_determinism(capsys, tmp_path):
    cfg = tmp_path / "grid.yaml"
    cfg.write_text("m: [16, 32]\npi0: [0.25, 1.0]\nrho: [0.0, 0.5]\nreps: 60\nprocedures: [MS, STS]\n")
    outs = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}.csv"
        assert run(capsys, "simulate", "--config", cfg, "--out", out, "--workers", workers, "--seed", 77)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert len(read_rows(outs[0].decode())) == 16


def test_simulate_structured_format(capsys, tmp_path):
    out = tmp_path / "res.json"
    assert run(capsys, "simulate", "--preset", "smoke", "--out", out, "--format", "structured")[0] == 0
    doc = json.loads(out.read_text())
    assert len(doc["results"]) == 2 and (tmp_path / "res.csv").exists()


def test_simulate_errors(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("m: [16\n")
    assert run(capsys, "simulate", "--config", bad)[0] == 2
    bad.write_text("pi0: 0.5\n")
    assert run(capsys, "simulate", "--config", bad)[0] == 2
    assert run(capsys, "simulate", "--config", tmp_path / "missing.yaml")[0] == 4
    assert run(capsys, "simulate", "--preset", "smoke", "--out", tmp_path / "no" / "dir.csv")[0] == 4
