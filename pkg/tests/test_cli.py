import json
import subprocess
import sys

import pytest

from obspart.cli import main
from obspart.dsl import emit_scenario


@pytest.fixture()
def files(tmp_path, frw, wigner):
    (tmp_path / "frw.scn").write_text(emit_scenario(frw))
    (tmp_path / "wigner.scn").write_text(emit_scenario(wigner))
    (tmp_path / "uniform.prior").write_text("p{} = 0.25\np{I} = 0.25\np{II} = 0.25\np{I,II} = 0.25\n")
    (tmp_path / "both.prior").write_text("p{I,II} = 1\n")
    (tmp_path / "bad.prior").write_text("p{} = 0.6\np{I} = 0.6\n")
    (tmp_path / "broken.scn").write_text('scenario "x"\nfactor a { p, q }\ninit = |p,q>\n')
    (tmp_path / "incomplete.scn").write_text(
        'scenario "x"\nfactor a { p, q }\ninit = |p>\nstep A observer "F" { branch p : |p><p| }\n'
    )
    return tmp_path


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_exit_codes(capsys, files):
    assert run(capsys, "validate", files / "frw.scn")[0] == 0
    code, _, err = run(capsys, "validate", files / "incomplete.scn")
    assert code == 1
    assert "completeness" in err
    code, _, err = run(capsys, "validate", files / "broken.scn")
    assert code == 2
    assert "line 3" in err
    assert run(capsys, "validate", files / "missing.scn")[0] == 3


def test_usage_error_is_3(capsys):
    assert run(capsys, "sample")[0] == 3
    assert run(capsys, "frobnicate")[0] == 3
    assert run(capsys, "builtin", "nope")[0] == 3


def test_builtin_round_trips(capsys, files):
    code, out, _ = run(capsys, "builtin", "frw")
    assert code == 0
    assert out == (files / "frw.scn").read_text()


def test_exact_halting_entry(capsys, files):
    code, out, _ = run(capsys, "exact", files / "frw.scn", "--partition", "I,II")
    assert code == 0
    rows = [line.split("\t") for line in out.splitlines()]
    assert rows[0] == ["I", "II", "III", "IV", "prob"]
    table = {tuple(r[:4]): float(r[4]) for r in rows[1:]}
    assert abs(table[("-", "-", "okbar", "ok")] - 1 / 12) <= 1e-12


def test_exact_with_prior(capsys, files):
    code, out, _ = run(capsys, "exact", files / "frw.scn", "--prior", files / "uniform.prior")
    assert code == 0
    assert len(out.splitlines()) == 17
    assert abs(sum(float(line.split("\t")[-1]) for line in out.splitlines()[1:]) - 1) <= 1e-12


def test_exact_rejects_bad_partition(capsys, files):
    assert run(capsys, "exact", files / "frw.scn", "--partition", "III")[0] == 3
    assert run(capsys, "exact", files / "frw.scn")[0] == 3


def test_invalid_prior_exit_1(capsys, files):
    assert run(capsys, "sample", files / "frw.scn", "--prior", files / "bad.prior", "--rounds", 3, "--seed", 1)[0] == 1


def test_sample_lines(capsys, files):
    code, out, _ = run(
        capsys, "sample", files / "frw.scn", "--prior", files / "uniform.prior", "--rounds", 3, "--seed", 1,
        "--record-partition",
    )
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 3
    recs = [json.loads(line) for line in lines]
    assert [r["round"] for r in recs] == [0, 1, 2]
    assert all(set(r) == {"round", "outcomes", "halted", "partition"} for r in recs)


def test_sample_deterministic_across_jobs(capsys, files):
    args = ["sample", files / "frw.scn", "--prior", files / "uniform.prior", "--rounds", 70000, "--seed", 9]
    outs = {run(capsys, *args, "--jobs", j)[1] for j in (1, 1, 4)}
    assert len(outs) == 1


def test_halt_summary(capsys, files):
    args = ["halt", files / "frw.scn", "--prior", files / "both.prior", "--seed", 3, "--max-rounds", 1000, "--trials", 200]
    code, out, _ = run(capsys, *args)
    assert code == 0
    summary = json.loads(out)
    assert summary["trials"] == 200
    assert summary["exhausted"] == 0
    assert len(summary["rounds"]) == 200
    assert run(capsys, *args, "--jobs", 3)[1] == out
    assert run(capsys, "halt", files / "wigner.scn", "--prior", files / "both.prior", "--seed", 1, "--max-rounds", 5)[0] == 3


def test_infer_pipeline(capsys, files):
    data = files / "data.jsonl"
    _, out, _ = run(
        capsys, "sample", files / "frw.scn", "--prior", files / "uniform.prior", "--rounds", 20000, "--seed", 4,
        "--uniformize",
    )
    data.write_text(out)
    code, out, err = run(capsys, "infer", files / "frw.scn", "--data", data)
    assert code == 0
    res = json.loads(out)
    assert set(res["pHat"]) == {"{}", "{I}", "{II}", "{I,II}"}
    assert res["identifiable"] and res["converged"]
    assert sum(abs(w - 0.25) for w in res["pHat"].values()) < 0.1
    code, out2, _ = run(capsys, "infer", files / "frw.scn", "--data", data, "--method", "ls")
    assert code == 0
    assert json.loads(out2)["identifiable"]


def test_infer_rejects_blanks(capsys, files):
    data = files / "raw.jsonl"
    _, out, _ = run(capsys, "sample", files / "frw.scn", "--prior", files / "both.prior", "--rounds", 5, "--seed", 4)
    data.write_text(out)
    assert run(capsys, "infer", files / "frw.scn", "--data", data)[0] == 3
    data.write_text("{not json\n")
    assert run(capsys, "infer", files / "frw.scn", "--data", data)[0] == 2


def test_entry_point_reads_stdin(files):
    text = (files / "frw.scn").read_text()
    cmd = [sys.executable, "-m", "obspart", "exact", "-", "--partition", "I,II"]
    a = subprocess.run(cmd, input=text, capture_output=True, text=True, check=True)
    b = subprocess.run(cmd, input=text, capture_output=True, text=True, check=True)
    assert a.stdout == b.stdout
    assert "okbar\tok\t0.08333333333333333" in a.stdout
    bad = subprocess.run([sys.executable, "-m", "obspart", "validate", "-"], input="scenario", capture_output=True, text=True)
    assert bad.returncode == 2
