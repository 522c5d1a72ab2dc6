import csv
import json
import math

import pytest

from singweyl.cli import main, parse_complex, parse_z_grid, UsageError
from singweyl.report import load_records


@pytest.fixture()
def free_file(tmp_path):
    f = tmp_path / "free.json"
    f.write_text(json.dumps({"l": 0, "b": "pi", "beta": 0, "potential": {"family": "free"}}))
    return f


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_eigs_writes_csv_json_and_record(tmp_path, free_file):
    out = tmp_path / "out"
    assert main(["eigs", "--problem", str(free_file), "--count", "20", "--out", str(out)]) == 0
    (csvf,) = out.glob("eigs_*.csv")
    rows = _rows(csvf)
    assert rows[0] == ["k", "lambda", "gamma", "c", "wprime_residual"]
    assert len(rows) == 21
    for r in rows[1:]:
        k = int(r[0])
        assert float(r[1]) == pytest.approx(k * k, rel=1e-8)
    (js,) = out.glob("eigs_*.json")
    assert json.loads(js.read_text())["tail_fit"]["p"] == pytest.approx(2.0, abs=1e-3)
    recs = load_records(out)
    assert len(recs) == 1 and recs[0]["passed"] and recs[0]["tolerances"]["ode_rtol"] == 1e-11


def test_outputs_are_deterministic(tmp_path, free_file):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["eigs", "--problem", str(free_file), "--count", "8", "--out", str(d)]) == 0
    (fa,), (fb,) = a.glob("eigs_*.csv"), b.glob("eigs_*.csv")
    assert fa.read_bytes() == fb.read_bytes()


def test_records_append(tmp_path, free_file):
    out = tmp_path / "o"
    for _ in range(2):
        main(["eigs", "--problem", str(free_file), "--count", "3", "--out", str(out)])
    assert len(load_records(out)) == 2


def test_verify_mf3_prints_residual(tmp_path, free_file, capsys):
    rc = main(["verify", "--identity", "mf3", "--problem", str(free_file), "--z", "-1", "--j", "1",
               "--out", str(tmp_path)])
    assert rc == 0
    assert "mf3: residual" in capsys.readouterr().out
    (f,) = tmp_path.glob("verify_mf3_*.json")
    d = json.loads(f.read_text())
    assert d["lhs"][0] == pytest.approx(0.25, rel=1e-8)


def test_verify_trace_and_kernel(tmp_path, free_file):
    assert main(["verify", "--identity", "kernel", "--problem", str(free_file), "--z", "1", "--w", "1",
                 "--out", str(tmp_path)]) == 0
    (f,) = tmp_path.glob("verify_kernel_*.json")
    assert json.loads(f.read_text())["K_formula"][0] == pytest.approx(math.pi / 2, rel=1e-9)


def test_weyl_grid_and_gauge(tmp_path, free_file):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"g": [0.0], "f": [1.0]}))
    rc = main(["weyl", "--problem", str(free_file), "--z-grid=-2:3:6:0.5", "--gauge", str(g),
               "--out", str(tmp_path), "--dump-jets"])
    assert rc == 0
    (f,) = tmp_path.glob("weyl_*.csv")
    rows = _rows(f)
    assert rows[0] == ["re_z", "im_z", "re_M", "im_M"] and len(rows) == 7
    assert list(tmp_path.glob("jets_phi_*.csv"))
    poles = json.loads(next(tmp_path.glob("weyl_poles_*.json")).read_text())
    assert poles["poles"][0]["lambda"] == pytest.approx(1.0)


def test_nentire_and_report(tmp_path):
    out = tmp_path / "run"
    assert main(["nentire", "--problem", "builtin:bessel-l2", "--out", str(out), "--jmax", "3"]) == 0
    assert main(["report", "--run-dir", str(out)]) == 0
    text = (out / "report.md").read_text()
    assert "minimal n (empirical) = 2; threshold bound n >= 2; sharp-corollary reading 4" in text
    assert "## identities" not in text  # empty sections are omitted
    assert list(out.glob("plot_nentire_ladder_*_j1.csv"))


def test_cconds_and_failing_check(tmp_path, free_file, capsys):
    assert main(["cconds", "--problem", str(free_file), "--beta2", "pi/2", "--n", "1", "--count", "40",
                 "--out", str(tmp_path)]) == 0
    rc = main(["cconds", "--problem", str(free_file), "--beta2", "pi/2", "--n", "0", "--count", "40",
               "--out", str(tmp_path)])
    assert rc == 2
    assert "FAIL c3_convergent" in capsys.readouterr().err
    assert [r["passed"] for r in load_records(tmp_path)] == [True, False]


def test_kernel_pairs(tmp_path, free_file):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("re_w,im_w,re_z,im_z\n1,0,1,0\n0.5,0.3,2,-1\n")
    assert main(["kernel", "--problem", str(free_file), "--pairs", str(pairs), "--out", str(tmp_path)]) == 0
    rows = _rows(next(tmp_path.glob("kernel_*.csv")))
    assert rows[0] == ["re_w", "im_w", "re_z", "im_z", "K_integral", "K_formula", "rel_diff"]
    assert float(rows[1][6]) < 1e-6


def test_report_empty_and_corrupt(tmp_path, free_file, caplog):
    assert main(["report", "--run-dir", str(tmp_path)]) == 1
    assert main(["eigs", "--problem", str(free_file), "--count", "3", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "runs.jsonl", "a") as fh:
        fh.write("{truncated\n")
    assert main(["report", "--run-dir", str(tmp_path)]) == 0
    assert "skipping corrupt record" in caplog.text
    assert "## spectrum" in (tmp_path / "report.md").read_text()


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["eigs", "--problem", "/no/such/file.json"],
    ["weyl", "--problem", "builtin:free"],
    ["weyl", "--problem", "builtin:free", "--z-grid", "1:2"],
    ["verify", "--problem", "builtin:free", "--identity", "mf9"],
    ["report", "--run-dir", "/no/such/dir"],
])
def test_usage_errors_exit_1(argv, tmp_path):
    if argv[0] != "report" and "--out" not in argv:
        argv = argv + ["--out", str(tmp_path)]
    with pytest.raises(SystemExit) as e:
        raise SystemExit(main(argv))
    assert e.value.code == 1


def test_bad_problem_file_exit_1(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"l": -3, "b": 1}')
    assert main(["eigs", "--problem", str(f), "--out", str(tmp_path)]) == 1


def test_parsers():
    assert parse_complex("-1+2i") == complex(-1, 2)
    assert parse_complex("3") == 3
    z = parse_z_grid("0:1:3:0.5")
    assert list(z) == [0.5j, 0.5 + 0.5j, 1 + 0.5j]
    with pytest.raises(UsageError):
        parse_z_grid("0:1:0")
    with pytest.raises(UsageError):
        parse_complex("abc")
