"""The end-to-end optimization: circuit, pattern, signal shift, extended circuit, compact circuit."""

from __future__ import annotations

from dataclasses import dataclass, replace

from mbqc_compact.circuit import (
    Circuit,
    SlicedCircuit,
    circuit_stats,
    extended_translation,
)
from mbqc_compact.compactify import CompactifyTrace, compactify
from mbqc_compact.flow import Flow, SignalShiftedFlow, find_flow, ssf_from_flow
from mbqc_compact.pattern import (
    MeasurementPattern,
    flow_pattern,
    pattern_depth,
    pattern_from_circuit,
    pauli_simplify,
    signal_shift,
)
from mbqc_compact.sim import (
    EQUIV_TOL,
    SimulationError,
    circuit_output_unitary,
    circuit_unitary,
    equivalent_up_to_phase,
)


class PipelineError(RuntimeError):
    pass


@dataclass
class OptimizeResult:
    source: Circuit
    pattern: MeasurementPattern
    flow: Flow
    ssf: SignalShiftedFlow
    shifted: MeasurementPattern
    extended: SlicedCircuit
    compact: Circuit
    trace: CompactifyTrace
    input_order: tuple[int, ...]

    def report(self) -> dict:
        before = circuit_stats(self.source)
        after = circuit_stats(self.compact)
        return {
            "wires_before": before.wires,
            "wires_after": after.wires,
            "extended_wires": len(self.extended.wires),
            "flow_depth": self.flow.depth,
            "ssf_depth": pattern_depth(self.shifted),
            "circuit_depth_before": before.depth,
            "circuit_depth_after": after.depth,
            "jlayers_before": before.jlayers,
            "jlayers_after": after.jlayers,
            "graph_degree": self.pattern.space.degree(),
        }

    def verify(self, tol: float = EQUIV_TOL) -> bool:
        """The compact circuit implements the source unitary, with leftover measured wires factoring out."""
        u = circuit_unitary(self.source)
        try:
            v = circuit_output_unitary(self.compact, self.input_order, tol)
        except SimulationError:
            return False
        return equivalent_up_to_phase(v, u, tol)


def rename_wires(c: Circuit, mapping: dict[int, int]) -> Circuit:
    gates = tuple(replace(g, qubits=tuple(mapping[q] for q in g.qubits)) for g in c.gates)
    return Circuit(
        tuple(mapping[w] for w in c.wires),
        {mapping[w]: s for w, s in c.initial.items()},
        gates,
        frozenset(mapping[w] for w in c.measured),
    )


def optimize(circ: Circuit, *, pauli: bool = False) -> OptimizeResult:
    """Run the whole pipeline on a circuit of J and CZ gates.

    The compact circuit is relabelled so that output wires carry the source
    wire ids; wires left over in Pauli mode get fresh ids above them.
    """
    if circ.measured or any(circ.initial.get(w, "input") != "input" for w in circ.wires):
        raise PipelineError("source circuit must have input wires only and no measurements")
    p = pattern_from_circuit(circ)
    g = p.space
    fl = find_flow(g)
    if fl is None:
        raise PipelineError("translated pattern has no flow")
    ssf = ssf_from_flow(fl, g)
    shifted = signal_shift(flow_pattern(fl, g, p.angles()), fl)
    if pauli:
        shifted = pauli_simplify(shifted)
    ext = extended_translation(shifted, fl)
    compact, trace = compactify(ext, fl, None if pauli else ssf, pauli=pauli)
    to_wire = dict(zip(g.outputs, circ.wires))
    from_wire = dict(zip(g.inputs, circ.wires))
    if not pauli:
        for o, i in trace.origin.items():
            if from_wire.get(i) != to_wire.get(o):
                raise PipelineError(f"compact wire {o} carries input {i} from another source wire")
    fresh = max(circ.wires, default=-1) + 1
    mapping = {}
    for w in compact.wires:
        if w in to_wire:
            mapping[w] = to_wire[w]
        else:
            mapping[w] = fresh
            fresh += 1
    carrier = {i: o for o, i in trace.origin.items()}
    input_order = tuple(mapping[carrier[i]] for i in g.inputs)
    compact = rename_wires(compact, mapping)
    return OptimizeResult(circ, p, fl, ssf, shifted, ext, compact, trace, input_order)
