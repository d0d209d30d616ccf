import json
import subprocess
import sys

import pytest

from astrakahn.cli import main, read_stream
from astrakahn.messages import Data, Sigma

from netutil import FIX

SUM = ["run", str(FIX / "sum.ak"), "--in", f"a={FIX / 'sum_a.stream'}", "--in", f"b={FIX / 'sum_b.stream'}"]
LOOP = ["run", str(FIX / "loop.ak"), "--in", f"a={FIX / 'loop_a.stream'}"]


def akc(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def stream_lines(out, chan):
    return [line.split(" ", 1)[1] for line in out.splitlines() if line.split(" ", 1)[0] == chan]


def test_parse_lists_declarations(capsys):
    code, out, _ = akc(capsys, "parse", str(FIX / "loop.ak"))
    assert code == 0
    assert out.splitlines()[0] == "net loop (a | out)"
    assert "spread" in out


def test_parse_error_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.ak"
    bad.write_text("net x (a | b) connect f .. end")
    code, _, err = akc(capsys, "parse", str(bad))
    assert code == 1 and "bad.ak" in err


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run"])
    assert e.value.code == 1


def test_check_sum(capsys):
    code, out, _ = akc(capsys, "check", str(FIX / "sum.ak"), "--in", f"a={FIX / 'sum_a.stream'}",
                       "--in", f"b={FIX / 'sum_b.stream'}")
    assert code == 0
    assert "  output s: 1" in out and "  output c: 2" in out
    assert "constraints: Sat" in out


def test_check_cal(capsys):
    code, out, _ = akc(capsys, "check", str(FIX / "cal.ak"), "--boxes", str(FIX / "cal_bad.boxes"))
    assert code == 1 and "Unsat" in out and "channel m" in out
    code, out, _ = akc(capsys, "check", str(FIX / "cal.ak"), "--boxes", str(FIX / "cal_ok.boxes"))
    assert code == 0 and "re-check: 1/1 constraints hold" in out


def test_check_synch_file(capsys):
    code, out, _ = akc(capsys, "check", str(FIX / "zip2.sync"))
    assert code == 0 and "vertex zip2" in out


def test_graph_outputs(capsys, tmp_path):
    code, out, _ = akc(capsys, "graph", str(FIX / "sum.ak"), "--format", "json")
    assert code == 0 and json.loads(out)["vertices"][0]["label"] == "add2bit"
    code, out, _ = akc(capsys, "graph", str(FIX / "loop.ak"), "--dot", str(tmp_path / "g.dot"))
    assert code == 0 and (tmp_path / "g.dot").read_text().startswith("digraph")


def test_import(capsys):
    code, out, _ = akc(capsys, "import", str(FIX / "diamond.graph"))
    assert code == 0
    assert out.strip() == "(<fb, x | a | p, q> .. (<p | b | r> || <q | c | s>) .. <r, s | d | fb, y>)\\"


def test_run_sum(capsys):
    code, out, err = akc(capsys, *SUM, "--capacity", "1")
    assert code == 0 and "status: terminated" in err
    assert stream_lines(out, "s") == ["data 3", "sigma 1", "data 0", "data 3", "sigma 0"]


def test_run_deadlock_exit_2(capsys):
    code, _, err = akc(capsys, *LOOP, "--pressurise-wraps")
    assert code == 2
    assert "deadlock cycle: ~@0 -> spread@1 -> ~@0" in err


def test_run_loop_completes(capsys):
    code, out, _ = akc(capsys, *LOOP)
    assert code == 0 and len(stream_lines(out, "out")) == 17


def test_run_budget_exit_3(capsys):
    code, _, err = akc(capsys, *LOOP, "--max-steps", "5")
    assert code == 3 and "status: budget" in err


def test_run_fault_exit_4(capsys):
    code, _, err = akc(capsys, "run", str(FIX / "series.ak"), "--in", f"x={FIX / 'loop_a.stream'}",
                       "--replica-cap", "2")
    assert code == 4 and "fault:" in err


def test_run_traces_are_identical(capsys, tmp_path):
    for k in (1, 2):
        akc(capsys, *LOOP, "--trace", str(tmp_path / f"t{k}.ndjson"), "--seed", "9")
    a, b = (tmp_path / "t1.ndjson").read_text(), (tmp_path / "t2.ndjson").read_text()
    assert a == b and a
    first = json.loads(a.splitlines()[0])
    assert {"step", "vertex", "action", "channel", "message"} <= set(first)


def test_seed_from_environment(capsys, tmp_path, monkeypatch):
    src = tmp_path / "m.ak"
    src.write_text("net m (a, b | c) connect <a, b | ~ | c> end\n")
    (tmp_path / "a.stream").write_text("".join(f"data {i}\n" for i in range(8)))
    (tmp_path / "b.stream").write_text("".join(f"data {i + 100}\n" for i in range(8)))
    argv = ["run", str(src), "--in", f"a={tmp_path / 'a.stream'}", "--in", f"b={tmp_path / 'b.stream'}"]
    outs = {}
    for seed in ("1", "2", "3", "4"):
        monkeypatch.setenv("AKC_SEED", seed)
        outs[seed] = akc(capsys, *argv)[1]
        assert akc(capsys, *argv, "--seed", seed)[1] == outs[seed]
    assert len(set(outs.values())) > 1


def test_pressure_report_file(capsys, tmp_path):
    path = tmp_path / "p.json"
    code, _, _ = akc(capsys, *LOOP, "--pressurise-wraps", "--pressure", str(path))
    rows = json.loads(path.read_text())
    assert code == 2 and any(r["blocked"] for r in rows)


def test_read_stream(tmp_path):
    p = tmp_path / "s.stream"
    p.write_text("# comment\ndata {a: 1}\nsigma 2\n\ndata 3\n")
    msgs, depth = read_stream(p)
    assert depth == 2 and msgs[1] == Sigma(2) and isinstance(msgs[0], Data)
    p.write_text("depth 3\ndata 1\n")
    assert read_stream(p)[1] == 3


def test_entry_point_runs():
    r = subprocess.run([sys.executable, "-m", "astrakahn.cli", "import", str(FIX / "diamond.graph")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("(")
