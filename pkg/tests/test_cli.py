import csv
import json

import pytest

from retractor.cli import main
from retractor.harness.report import read_trace


@pytest.fixture
def run(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)

    def _run(*argv):
        code = main(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err

    return _run


def test_solve_rotations(run, spec_path, tmp_path):
    code, out, _ = run("solve", spec_path("rotations"), "--report", "r.json", "--trace", "t.csv")
    assert code == 0
    assert "max residual" in out
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["version"] == "retractor.run_report/1"
    assert rep["evaluation"]["max_residual"] <= 1e-6
    assert {"certify", "build", "total"} <= set(rep["timings"])
    rows = read_trace(tmp_path / "t.csv")
    assert {r[0] for r in rows} == {1, 2}


def test_solve_default_output_paths(run, spec_path, tmp_path):
    assert run("solve", spec_path("identity"))[0] == 0
    assert (tmp_path / "identity.report.json").exists()
    assert (tmp_path / "identity.trace.csv").exists()


def test_square_map_refused_then_allowed(run, spec_path):
    code, out, err = run("solve", spec_path("squaremap"))
    assert code == 3
    assert json.loads(out.split("witness: ", 1)[1]) == [[1.0, 0.0, 0.0], [0.5, 0.0, 0.0]]
    assert run("solve", spec_path("squaremap"), "--allow-uncertified")[0] == 0


def test_verify_statuses(run, spec_path):
    code, out, _ = run("verify", spec_path("identity"))
    assert code == 0 and "audits passed" in out
    code, out, _ = run("verify", spec_path("noncommuting"))
    assert code == 3
    assert json.loads(out.split("witness: ", 1)[1]) == [0, 1, [0.0, 0.0]]


def test_parse_errors(run, tmp_path):
    (tmp_path / "bad.json").write_text("{")
    assert run("solve", "bad.json")[0] == 2
    assert run("solve", "missing.json")[0] == 2
    assert run("verify", "bad.json")[0] == 2
    assert run("frobnicate")[0] == 2
    (tmp_path / "neg.json").write_text(json.dumps({
        "space": {"dim": 2}, "body": {"shape": "ball"}, "maps": [{"kind": "identity"}],
        "family": [0], "solver": {"eps": -1}}))
    assert run("solve", "neg.json")[0] == 2


def test_convergence_failure_prints_trace(run, spec_path, tmp_path):
    code, out, _ = run("solve", spec_path("coordwise"), "--max-iter", "3", "--trace", "fail.csv")
    assert code == 4
    assert "trace: fail.csv" in out
    assert read_trace(tmp_path / "fail.csv")


def test_overrides_reach_report(run, spec_path, tmp_path):
    run("solve", spec_path("rotations"), "--eps", "1e-4", "--seed", "3", "--report", "r.json")
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["problem"]["spec"]["solver"]["eps"] == 1e-4 and rep["seed"] == 3


def test_plotdata(run, spec_path, tmp_path):
    run("solve", spec_path("rotations"), "--trace", "t.csv")
    code, out, _ = run("plotdata", "t.csv")
    assert code == 0
    series = json.loads(out)["series"]
    assert [s["stage"] for s in series] == [1, 2]
    steps = series[1]["step_norm"]
    assert all(b <= a for a, b in zip(steps, steps[1:]))
    assert run("plotdata", "t.csv", "--format", "csv", "--out", "p.csv")[0] == 0
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["stage", "iteration", "step_norm", "log10_step_norm"]


def test_plotdata_identity_single_row(run, spec_path):
    run("solve", spec_path("identity"), "--trace", "id.csv")
    series = json.loads(run("plotdata", "id.csv")[1])["series"]
    assert len(series) == 1 and len(series[0]["iteration"]) == 1


def test_plotdata_bad_input(run, tmp_path):
    assert run("plotdata", "nope.csv")[0] == 2
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    assert run("plotdata", "junk.csv")[0] == 2
    (tmp_path / "broken.csv").write_text("stage,iteration,step_norm,residual\n1,x,0.1,0.2\n")
    assert run("plotdata", "broken.csv")[0] == 2


def test_log_env_var(run, spec_path, monkeypatch):
    monkeypatch.setenv("RETRACTOR_LOG", "DEBUG")
    assert run("solve", spec_path("identity"))[0] == 0
