import json
import sys
from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace

import pytest

from mbqc_compact.circuit import CZ, Circuit, J, extended_translation
from mbqc_compact.flow import find_flow, ssf_from_flow
from mbqc_compact.graph import OpenGraph
from mbqc_compact.pattern import flow_pattern, pattern_from_circuit, signal_shift

FIXTURES = Path(__file__).parent / "fixtures"

EX1_ANGLES = (Fraction(1, 5), Fraction(2, 7), Fraction(3, 11))


def load_fixture(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text())


def example1_circuit() -> Circuit:
    a, b, c = EX1_ANGLES
    gates = [
        J(0, a), CZ(0, 1), J(1, b), CZ(0, 1), J(0, a), CZ(0, 1),
        CZ(0, 2), CZ(1, 2), J(1, b), CZ(1, 2), J(2, c),
    ]  # fmt: skip
    return Circuit.simple([0, 1, 2], gates)


def example1() -> SimpleNamespace:
    """Three-wire circuit whose pattern graph has vertices 1..8, I={1,4,7}, O={3,6,8}."""
    circ = example1_circuit()
    p = pattern_from_circuit(circ, start=1)
    g = p.space
    fl = find_flow(g)
    ssf = ssf_from_flow(fl, g)
    fp = flow_pattern(fl, g, p.angles())
    shifted = signal_shift(fp, fl)
    ext = extended_translation(shifted, fl)
    return SimpleNamespace(
        circuit=circ, pattern=p, graph=g, flow=fl, ssf=ssf, flow_pattern=fp, shifted=shifted, ext=ext
    )


def line_graph() -> OpenGraph:
    """Path 1..7 with I={1}, O={2,4,7}."""
    return OpenGraph.from_dict(load_fixture("line_graph.json"))


def example2_graph() -> OpenGraph:
    return OpenGraph.build(range(1, 7), [(5, 6), (4, 5), (2, 5), (2, 4), (2, 3), (1, 2)], [1, 4], [3, 6])


EX2_ANGLES = {1: Fraction(1, 3), 4: Fraction(1, 7), 2: Fraction(1, 2), 5: Fraction(0)}


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def line():
    return line_graph()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
