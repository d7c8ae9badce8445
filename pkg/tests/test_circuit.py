import json
from fractions import Fraction

import numpy as np
import pytest
from conftest import example1, line_graph
from oracle import dense_unitary, gate_matrix, same_up_to_phase

from mbqc_compact.circuit import (
    CX,
    CZ,
    Circuit,
    CircuitError,
    Ent,
    Gate,
    J,
    PauliZ,
    SlicedCircuit,
    apply_jgate_identity,
    circuit_stats,
    extended_translation,
    is_jblock,
    to_dot,
)
from mbqc_compact.flow import find_flow, ssf_from_flow
from mbqc_compact.graph import odd_neighborhood
from mbqc_compact.pattern import flow_pattern, pattern_from_circuit, signal_shift
from mbqc_compact.sim import circuit_output_unitary, circuit_unitary, pattern_unitary

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _line_ext():
    g = line_graph()
    fl = find_flow(g)
    shifted = signal_shift(flow_pattern(fl, g, {i: Fraction(i, 7) for i in fl.f}), fl)
    return g, fl, extended_translation(shifted, fl)


def test_gate_validation():
    with pytest.raises(CircuitError):
        Gate("T", (0,))
    with pytest.raises(CircuitError):
        Gate("CX", (1, 1))
    with pytest.raises(CircuitError):
        Gate("J", (0, 1), Fraction(0))
    assert J(0, 5).angle == Fraction(1)
    assert Ent(3, 1).qubits == (1, 3)


def test_circuit_rejects_unknown_wire():
    with pytest.raises(CircuitError):
        Circuit.simple([0], [CZ(0, 1)])


def test_j_zero_is_hadamard():
    assert np.allclose(circuit_unitary(Circuit.simple([0], [J(0, 0)])), H)


@pytest.mark.parametrize("gate", [J(0, Fraction(1, 3)), CZ(0, 1), CX(0, 1), CX(1, 0), PauliZ(1), Ent(0, 1)])
def test_simulated_gates_match_oracle(gate):
    c = Circuit.simple([0, 1], [gate])
    assert np.allclose(circuit_unitary(c), gate_matrix(gate, [0, 1]))


def test_extended_corrections_follow_ssf():
    for g, fl, ext in (_line_ext(), (example1().graph, example1().flow, example1().ext)):
        ssf = ssf_from_flow(fl, g)
        for i in fl.f:
            cx = {s.gate.qubits[1] for s in ext.slots if s.gate.kind == "CX" and s.owner == i}
            cz = {s.gate.qubits[1] for s in ext.slots if s.gate.kind == "CZ" and s.owner == i}
            assert cx == set(ssf.g[i])
            assert cz == set(odd_neighborhood(g, ssf.g[i]) & g.output_set)


def test_extended_slices_line_graph():
    _g, _fl, ext = _line_ext()
    assert len(ext.wires) == 7 and ext.jlayers() == 2
    assert {gt.qubits[0] for gt in ext.slice(1, "J")} == {1, 3, 5}
    assert {gt.qubits[0] for gt in ext.slice(2, "J")} == {6}
    assert ext.slice(2, "C", 6) == [CX(6, 7)]
    # CZ follows the CX corrections inside a block
    assert ext.slice(1, "C", 1) == [CX(1, 2), CX(1, 4), CX(1, 6), CZ(1, 7)]


def test_extended_blocks_ordered_against_flow():
    ex = example1()
    owners = [s.owner for s in ex.ext.slots if s.part == "C" and s.layer == 1]
    firsts = list(dict.fromkeys(owners))
    assert [ex.flow.layers[v] for v in firsts] == sorted(ex.flow.layers[v] for v in firsts)


def test_extended_circuit_matches_source():
    ex = example1()
    v = circuit_output_unitary(ex.ext.circuit(), [1, 4, 7])
    u = dense_unitary([0, 1, 2], ex.circuit.gates)
    assert same_up_to_phase(v, u)


def test_extended_translation_rejects_unshifted():
    ex = example1()
    with pytest.raises(CircuitError):
        extended_translation(ex.flow_pattern, ex.flow)


def _block():
    # |+> on wire 1, then E, J, CX and a Z measurement of wire 0
    gates = (Ent(0, 1), J(0, Fraction(1, 3)), CX(0, 1))
    return Circuit((0, 1), {0: "input", 1: "plus"}, gates, frozenset({0}))


def test_jblock_identity_gives_j_gate():
    c = _block()
    assert is_jblock(c, 0, 1)
    out = apply_jgate_identity(c, 0, 1)
    assert out.wires == (1,) and out.gates == (J(1, Fraction(1, 3)),)
    assert same_up_to_phase(circuit_output_unitary(c, [0]), circuit_unitary(out, [1]))


def test_jblock_conditions():
    c = _block()
    assert not is_jblock(Circuit(c.wires, {0: "input", 1: "input"}, c.gates, c.measured), 0, 1)
    assert not is_jblock(Circuit(c.wires, c.initial, c.gates, frozenset()), 0, 1)
    extra = Circuit(c.wires, c.initial, c.gates[:2] + (J(1, 0),) + c.gates[2:], c.measured)
    assert not is_jblock(extra, 0, 1)
    with pytest.raises(CircuitError):
        apply_jgate_identity(extra, 0, 1)


def test_fresh_extended_circuit_has_no_jblock():
    _, fl, ext = _line_ext()
    c = ext.circuit()
    assert not any(is_jblock(c, i, fi) for i, fi in fl.f.items())


def test_stats_examples():
    assert circuit_stats(Circuit.simple(range(4), [])).to_dict() == {
        "wires": 4, "jgates": 0, "jlayers": 0, "depth": 0, "maxdeg": 0,
    }  # fmt: skip
    _, _, ext = _line_ext()
    assert circuit_stats(ext.circuit()).wires == 7
    s = circuit_stats(example1().circuit)
    assert (s.wires, s.jgates, s.jlayers) == (3, 5, 5)


def test_stats_depth_and_degree():
    c = Circuit.simple([0, 1, 2], [J(0), CZ(0, 1), J(2), CZ(1, 2), CX(0, 2)])
    s = circuit_stats(c)
    assert s.depth == 4 and s.maxdeg == 2 and s.jlayers == 1


def test_circuit_json_round_trip():
    c = _block()
    d = json.loads(json.dumps(c.to_dict()))
    assert d["gates"][0] == {"kind": "E", "wires": [0, 1]}
    assert d["gates"][2] == {"kind": "CX", "control": 0, "target": 1}
    assert Circuit.from_dict(d) == c


def test_sliced_json_round_trip():
    ext = example1().ext
    back = SlicedCircuit.from_dict(json.loads(json.dumps(ext.to_dict())))
    assert back == ext


def test_malformed_json():
    with pytest.raises(CircuitError):
        Circuit.from_dict({"gates": []})
    with pytest.raises(CircuitError):
        SlicedCircuit.from_dict({**Circuit.simple([0], [J(0)]).to_dict(), "slots": []})


def test_to_dot_lists_every_gate():
    c = _block()
    dot = to_dot(c)
    assert dot.startswith("digraph") and dot.count(" [label=") >= len(c.gates)


def test_pattern_translation_is_equivalent_to_source():
    ex = example1()
    p = pattern_from_circuit(ex.circuit, start=1)
    # sorted inputs 1, 4, 7 and outputs 3, 6, 8 line up with wires 0, 1, 2
    assert same_up_to_phase(pattern_unitary(p), dense_unitary([0, 1, 2], ex.circuit.gates))
