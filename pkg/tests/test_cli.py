import json

import pytest
from conftest import FIXTURES

from mbqc_compact import cli
from mbqc_compact.circuit import Circuit, SlicedCircuit
from mbqc_compact.pattern import MeasurementPattern
from mbqc_compact.pipeline import OptimizeResult

EX1 = str(FIXTURES / "example1_circuit.json")
LINE = str(FIXTURES / "line_graph.json")


def _run(capsys, *argv):
    code = cli.main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_optimize_text_report(capsys):
    code, out, _ = _run(capsys, "optimize", "--in", EX1, "--verify")
    assert code == cli.EXIT_OK
    assert "flow depth 5, SSF depth 2, wires 8 -> 3" in out and "J layers 2" in out
    assert "verify: ok" in out


def test_optimize_json_report_and_outputs(capsys, tmp_path):
    dest, trace = tmp_path / "compact.json", tmp_path / "trace.json"
    code, out, _ = _run(
        capsys, "optimize", "--in", EX1, "--report", "json", "--verify", "--out", str(dest), "--emit-trace", str(trace)
    )
    assert code == cli.EXIT_OK
    rep = json.loads(out)
    assert rep["verified"] is True and rep["wires_after"] == 3 and rep["ssf_depth"] == 2
    body = json.loads(dest.read_text())
    assert body["input_order"] == [0, 1, 2]
    assert len(Circuit.from_dict(body).wires) == 3
    assert json.loads(trace.read_text())["events"]


def test_dump_state_writes_every_stage(capsys, tmp_path):
    code, _, _ = _run(capsys, "optimize", "--in", EX1, "--dump-state", str(tmp_path / "d"))
    assert code == cli.EXIT_OK
    names = {p.name for p in (tmp_path / "d").iterdir()}
    assert names == {f"{n}.json" for n in ("pattern", "flow", "ssf", "shifted", "extended", "compact", "trace")}
    MeasurementPattern.from_dict(json.loads((tmp_path / "d" / "shifted.json").read_text()))


def test_verification_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(OptimizeResult, "verify", lambda self, tol=1e-9: False)
    code, out, _ = _run(capsys, "optimize", "--in", EX1, "--verify")
    assert code == cli.EXIT_VERIFY and "MISMATCH" in out


def test_gflow_line_graph(capsys):
    code, out, _ = _run(capsys, "gflow", "--in", LINE)
    assert code == cli.EXIT_OK
    assert "optimal: yes" in out and "SSF layers: 0: [2, 4, 7] | 1: [6] | 2: [1, 3, 5]" in out


def test_gflow_only_graph(capsys):
    code, out, _ = _run(capsys, "gflow", "--in", str(FIXTURES / "gflow_only_graph.json"))
    assert code == cli.EXIT_OK and out.startswith("no flow; gflow layers: ")


def test_graph_without_gflow(capsys):
    code, out, _ = _run(capsys, "gflow", "--in", str(FIXTURES / "no_gflow_graph.json"), "--report", "json")
    assert code == cli.EXIT_OK
    assert json.loads(out)["max_delayed_gflow"] is None
    code, out, _ = _run(capsys, "gflow", "--in", str(FIXTURES / "no_gflow_graph.json"))
    assert out.strip() == "no flow, no gflow"


def test_stage_by_stage(capsys, tmp_path):
    shifted, ext, compact = tmp_path / "s.json", tmp_path / "e.json", tmp_path / "c.json"
    assert _run(capsys, "shift", "--in", EX1, "--out", str(shifted))[0] == cli.EXIT_OK
    assert _run(capsys, "extend", "--in", str(shifted), "--out", str(ext))[0] == cli.EXIT_OK
    assert len(SlicedCircuit.from_dict(json.loads(ext.read_text())).wires) == 8
    code, out, _ = _run(capsys, "compactify", "--in", str(ext), "--out", str(compact), "--verify")
    assert code == cli.EXIT_OK and "8 -> 3 wires" in out and "verify: ok" in out


def test_shift_is_seed_independent(capsys):
    a = _run(capsys, "shift", "--in", EX1, "--seed", "1", "--report", "json")[1]
    b = _run(capsys, "shift", "--in", EX1, "--seed", "2", "--report", "json")[1]
    assert json.loads(a) == json.loads(b) and json.loads(a)["depth"] == 2


def test_pauli_flow_through_cli(capsys, tmp_path):
    circ = {"wires": [0], "gates": [
        {"kind": "J", "wire": 0, "angle": {"num": 0, "den": 1}},
        {"kind": "J", "wire": 0, "angle": {"num": 1, "den": 4}},
    ]}  # fmt: skip
    src = tmp_path / "c.json"
    src.write_text(json.dumps(circ))
    code, out, _ = _run(capsys, "optimize", "--in", str(src), "--pauli", "--verify")
    assert code == cli.EXIT_OK and "verify: ok" in out


def test_verify_random(capsys):
    code, out, _ = _run(capsys, "verify", "--count", "5", "--seed", "3")
    assert code == cli.EXIT_OK and "checked 5 random circuits, 0 mismatches" in out


def test_bench_small(capsys):
    code, out, _ = _run(capsys, "bench", "--sizes", "20", "40", "80", "--report", "json")
    rep = json.loads(out)
    assert code == cli.EXIT_OK and rep["ok"] and len(rep["seconds"]) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["optimize"],
        ["optimize", "--in", "/nonexistent.json"],
        ["gflow", "--in", EX1],
        ["gflow", "--in", LINE, "--pauli"],
        ["compactify", "--in", EX1],
    ],
)
def test_input_errors(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == cli.EXIT_INPUT and err.startswith("error:")


def test_malformed_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = _run(capsys, "optimize", "--in", str(bad))
    assert code == cli.EXIT_INPUT and "not valid JSON" in err


def test_pipeline_config_validation():
    with pytest.raises(cli.InputError):
        cli.PipelineConfig(None, stages=("shift", "translate")).validate()
    with pytest.raises(cli.InputError):
        cli.PipelineConfig(None, stages=("translate", "extend")).validate()
    cli.PipelineConfig(None, stages=("translate", "shift", "pauli", "extend")).validate()
