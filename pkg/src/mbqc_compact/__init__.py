"""Signal shifted flow and compact circuits for measurement-based quantum computation."""

from mbqc_compact.circuit import Circuit, Gate, SlicedCircuit, circuit_stats, extended_translation
from mbqc_compact.compactify import CompactifyError, CompactifyTrace, compactify
from mbqc_compact.flow import Flow, GFlow, SignalShiftedFlow, find_flow, max_delayed_gflow, ssf_from_flow
from mbqc_compact.graph import OpenGraph, neighbors, odd_neighborhood
from mbqc_compact.pattern import MeasurementPattern, flow_pattern, pattern_from_circuit, signal_shift
from mbqc_compact.pipeline import OptimizeResult, optimize

__all__ = [
    "Circuit",
    "CompactifyError",
    "CompactifyTrace",
    "Flow",
    "GFlow",
    "Gate",
    "MeasurementPattern",
    "OpenGraph",
    "OptimizeResult",
    "SignalShiftedFlow",
    "SlicedCircuit",
    "circuit_stats",
    "compactify",
    "extended_translation",
    "find_flow",
    "flow_pattern",
    "max_delayed_gflow",
    "neighbors",
    "odd_neighborhood",
    "optimize",
    "pattern_from_circuit",
    "signal_shift",
    "ssf_from_flow",
]
