"""Seeded random circuits and open graphs for tests and benchmarks."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from mbqc_compact.circuit import CZ, Circuit, J
from mbqc_compact.flow import find_flow
from mbqc_compact.graph import OpenGraph
from mbqc_compact.pattern import pattern_from_circuit


def random_circuit(
    rng: random.Random, max_wires: int = 3, max_j: int = 6, max_cz: int = 4, denominators=(4,)
) -> Circuit:
    """A J/CZ circuit with angles ``k pi / d`` for ``d`` drawn from ``denominators``."""
    n = rng.randint(1, max_wires)
    gates = []
    for _ in range(rng.randint(0, max_j)):
        d = rng.choice(denominators)
        gates.append(J(rng.randrange(n), Fraction(rng.randrange(2 * d), d)))
    if n > 1:
        for _ in range(rng.randint(0, max_cz)):
            a, b = rng.sample(range(n), 2)
            gates.insert(rng.randrange(len(gates) + 1), CZ(a, b))
    return Circuit.simple(range(n), gates)


def random_flow_graph(rng: random.Random, max_vertices: int = 12, extra_edges: int = 3) -> OpenGraph:
    """An open graph with flow and ``|I| = |O|``.

    Starts from the graph of a random circuit and then tries a few extra
    edges, keeping each one only if a flow survives.
    """
    wires = rng.randint(1, min(4, max_vertices))
    gates = [
        J(rng.randrange(wires), Fraction(rng.randrange(8), 4)) for _ in range(rng.randint(0, max_vertices - wires))
    ]
    if wires > 1:
        for _ in range(rng.randint(0, 2 * wires)):
            a, b = rng.sample(range(wires), 2)
            gates.insert(rng.randrange(len(gates) + 1), CZ(a, b))
    g = pattern_from_circuit(Circuit.simple(range(wires), gates)).space
    verts = sorted(g.vertices)
    for _ in range(extra_edges):
        u, v = sorted(rng.sample(verts, 2)) if len(verts) > 1 else (0, 0)
        if u == v or g.has_edge(u, v):
            continue
        cand = OpenGraph.build(g.vertices, set(g.edges) | {(u, v)}, g.inputs, g.outputs)
        if find_flow(cand) is not None:
            g = cand
    return g


def random_open_graph(rng: random.Random, n: int, p: float = 0.4) -> OpenGraph:
    """Erdos-Renyi graph on ``n`` vertices with random, possibly overlapping, inputs and outputs."""
    edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < p]
    k = rng.randint(1, max(1, n - 1))
    inputs = rng.sample(range(n), rng.randint(0, k))
    outputs = rng.sample(range(n), k)
    return OpenGraph.build(range(n), edges, inputs, outputs)
