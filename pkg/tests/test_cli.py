import json
import subprocess
import sys

import pytest

from hyperdist import cli
from hyperdist.circuit import gen_random, parse_circuit, serialize_circuit
from hyperdist.distributor import check_program, read_program
from hyperdist.partitioner import InfeasibleBalanceError

from _fixtures import two_phase


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.dqc"
    path.write_text(serialize_circuit(gen_random(6, 40, 0.2, seed=1)))
    return path


def test_gen_qft_then_run(tmp_path, capsys):
    qft = tmp_path / "qft32.dqc"
    assert run(["gen", "qft", "32", "-o", str(qft)], capsys)[0] == 0
    assert parse_circuit(qft.read_text()).num_wires == 32
    code, out, _ = run(["run", str(qft), "--k", "4"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["report_version"] == 1
    assert 0 < report["ebits_per_cz"] < 1
    assert report["ebit_count"] == report["cut_count"]


def test_gen_random_to_stdout(capsys):
    code, out, _ = run(["gen", "random", "5", "--gates", "20", "--ccz-fraction", "0.2", "--seed", "3"], capsys)
    assert code == 0
    assert parse_circuit(out) == gen_random(5, 20, 0.2, seed=3)


def test_single_qpu_costs_nothing(tmp_path, capsys):
    path = tmp_path / "pair.dqc"
    path.write_text("qubits 2\ncz 0 1\n")
    code, out, _ = run(["run", str(path), "--k", "1"], capsys)
    assert code == 0
    assert json.loads(out)["ebit_count"] == 0


def test_verify_pass(small, capsys):
    code, out, _ = run(["run", str(small), "--k", "3", "--epsilon", "0.2", "--verify"], capsys)
    assert code == 0
    assert json.loads(out)["equivalence"] == "PASS"


def test_verify_skipped_above_limit(small, capsys):
    code, out, _ = run(["run", str(small), "--verify", "--verify-max-wires", "4"], capsys)
    assert code == 0 and json.loads(out)["equivalence"] == "SKIPPED"


def test_verify_failure_exit_code(small, capsys, monkeypatch):
    monkeypatch.setattr(cli, "check_program_equivalence", lambda *a, **kw: False)
    code, out, err = run(["run", str(small), "--verify"], capsys)
    assert code == cli.EXIT_VERIFY
    assert json.loads(out)["equivalence"] == "FAIL"
    assert "verifier" in err


def test_outputs_are_deterministic(small, tmp_path, capsys):
    reports, programs = [], []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        code, out, _ = run(["run", str(small), "--k", "3", "--segment", "auto", "--segment-window", "5", "--out", str(out_dir)], capsys)
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report == json.loads(out)
        report.pop("wall_time_s")
        reports.append(report)
        programs.append((out_dir / "program.dqcd").read_bytes())
    assert reports[0] == reports[1]
    assert programs[0] == programs[1]


def test_program_artifact_is_valid(small, tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run(["run", str(small), "--k", "2", "--out", str(out_dir), "--emit-hgr"], capsys)
    assert code == 0
    report = json.loads(out)
    dp = read_program((out_dir / "program.dqcd").read_text())
    assert dp.ebit_count == report["ebit_count"]
    assert (out_dir / "hypergraph.hgr").exists()
    # feeding the emitted partition back reproduces the run
    code, again, _ = run(["run", str(small), "--k", "2", "--import-partition", str(out_dir / "partition.txt")], capsys)
    assert code == 0
    assert json.loads(again)["ebit_count"] == report["ebit_count"]


def test_segment_modes_and_baseline(tmp_path, capsys):
    path = tmp_path / "phases.dqc"
    path.write_text(serialize_circuit(two_phase()))
    code, out, _ = run(
        ["run", str(path), "--k", "2", "--epsilon", "0.34", "--segment", "auto", "--segment-window", "36", "--baseline", "--verify"],
        capsys,
    )
    assert code == 0
    report = json.loads(out)
    assert len(report["segments"]) == 2 and report["teleports"] >= 1
    assert report["ebit_count"] == sum(s["cut_count"] for s in report["segments"]) + report["teleports"]
    assert report["equivalence"] == "PASS"
    assert report["baseline"]["ebit_count"] >= report["ebit_count"]
    code, out, _ = run(["run", str(path), "--k", "2", "--epsilon", "0.34", "--segment", "thresh=0.5", "--segment-window", "12", "--emit-hgr", "--out", str(tmp_path / "t")], capsys)
    assert code == 0
    assert (tmp_path / "t" / "segment0.hgr").exists()


def test_ccz_native_flag(tmp_path, capsys):
    path = tmp_path / "ccz.dqc"
    path.write_text("qubits 3\nccx 0 1 2\n")
    code, out, _ = run(["run", str(path), "--k", "3", "--ccz-native", "--epsilon", "0"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["circuit"]["num_ccz"] == 1 and report["ebit_count"] == 2


def test_missing_input(tmp_path, capsys):
    code, _, err = run(["run", str(tmp_path / "nope.dqc")], capsys)
    assert code == cli.EXIT_INPUT
    assert "hyperdist: circuit:" in err


def test_malformed_input(tmp_path, capsys):
    path = tmp_path / "bad.dqc"
    path.write_text("qubits 2\ncz 0 0\n")
    code, _, err = run(["run", str(path)], capsys)
    assert code == cli.EXIT_INPUT and "line 2" in err


def test_import_with_segmentation_rejected(small, capsys):
    code, _, err = run(["run", str(small), "--segment", "auto", "--import-partition", "x"], capsys)
    assert code == cli.EXIT_INPUT and "hypergraph" in err


def test_infeasible_exit_code(small, capsys, monkeypatch):
    def boom(args):
        raise InfeasibleBalanceError("no room")

    monkeypatch.setattr(cli, "run_pipeline", boom)
    code, _, err = run(["run", str(small)], capsys)
    assert code == cli.EXIT_BALANCE and "partitioner" in err


@pytest.mark.parametrize("argv", [["run"], ["run", "x", "--k", "0"], ["run", "x", "--segment", "often"], ["frobnicate"]])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == cli.EXIT_USAGE


def test_module_entry_point(small):
    proc = subprocess.run(
        [sys.executable, "-m", "hyperdist", "run", str(small), "--k", "2"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["ebit_count"] >= 0


def test_report_program_consistency(small, tmp_path, capsys):
    out_dir = tmp_path / "o"
    run(["run", str(small), "--k", "3", "--window", "5", "--out", str(out_dir)], capsys)
    dp = read_program((out_dir / "program.dqcd").read_text())
    check_program(dp)
    report = json.loads((out_dir / "report.json").read_text())
    assert report["ebit_peak"] == dp.ebit_peak
    assert report["config"]["window"] == 5
