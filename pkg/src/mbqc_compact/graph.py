"""Open graphs and odd-neighbourhood algebra."""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable
from dataclasses import dataclass, field


class GraphError(ValueError):
    """Raised for malformed open graphs or unknown vertices."""


@dataclass(frozen=True)
class OpenGraph:
    """An undirected graph with ordered input and output vertex sequences.

    Vertex ids are non-negative integers. ``inputs`` and ``outputs`` may
    overlap. Instances are immutable; build a new graph to change one.
    """

    vertices: frozenset[int]
    edges: frozenset[tuple[int, int]]
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    _adj: dict[int, frozenset[int]] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        adj: dict[int, set[int]] = {v: set() for v in self.vertices}
        for v in self.vertices:
            if not isinstance(v, int) or v < 0:
                raise GraphError(f"vertex ids must be non-negative integers, got {v!r}")
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            if u not in adj or v not in adj:
                raise GraphError(f"edge ({u}, {v}) references an unknown vertex")
            if u > v:
                raise GraphError(f"edge ({u}, {v}) is not normalized")
            adj[u].add(v)
            adj[v].add(u)
        for name, seq in (("input", self.inputs), ("output", self.outputs)):
            if len(set(seq)) != len(seq):
                raise GraphError(f"duplicate {name} vertex")
            for v in seq:
                if v not in adj:
                    raise GraphError(f"{name} vertex {v} is not in the graph")
        object.__setattr__(self, "_adj", {v: frozenset(ns) for v, ns in adj.items()})

    @classmethod
    def build(
        cls,
        vertices: Iterable[int],
        edges: Iterable[tuple[int, int]],
        inputs: Iterable[int],
        outputs: Iterable[int],
    ) -> OpenGraph:
        """Construct a graph, normalizing edges to ``u < v``.

        Duplicate edges (in either orientation) are rejected.
        """
        norm: set[tuple[int, int]] = set()
        for u, v in edges:
            e = (min(u, v), max(u, v))
            if e in norm:
                raise GraphError(f"duplicate edge {e}")
            norm.add(e)
        return cls(frozenset(vertices), frozenset(norm), tuple(inputs), tuple(outputs))

    @property
    def input_set(self) -> frozenset[int]:
        return frozenset(self.inputs)

    @property
    def output_set(self) -> frozenset[int]:
        return frozenset(self.outputs)

    @property
    def non_outputs(self) -> frozenset[int]:
        return self.vertices - self.output_set

    @property
    def non_inputs(self) -> frozenset[int]:
        return self.vertices - self.input_set

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj.get(u, ())

    def degree(self) -> int:
        """Maximum vertex degree (0 for an edgeless graph)."""
        return max((len(ns) for ns in self._adj.values()), default=0)

    def to_dict(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "edges": [list(e) for e in sorted(self.edges)],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> OpenGraph:
        try:
            return cls.build(
                data["vertices"],
                [tuple(e) for e in data["edges"]],
                data["inputs"],
                data["outputs"],
            )
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def neighbors(g: OpenGraph, v: int) -> frozenset[int]:
    """Vertices sharing an edge with ``v``."""
    try:
        return g._adj[v]
    except KeyError:
        raise GraphError(f"unknown vertex {v}") from None


def odd_neighborhood(g: OpenGraph, k: Iterable[int]) -> frozenset[int]:
    """Vertices adjacent to an odd number of members of ``k``."""
    out: set[int] = set()
    for u in k:
        # symmetric difference accumulates the parity per vertex
        out ^= neighbors(g, u)
    return frozenset(out)


def neighborhood_of_set(g: OpenGraph, k: Iterable[int]) -> frozenset[int]:
    """Union of the neighbourhoods of the members of ``k``."""
    out: set[int] = set()
    for u in k:
        out |= neighbors(g, u)
    return frozenset(out)


def path_graph(vertices: Iterable[int], inputs: Iterable[int], outputs: Iterable[int]) -> OpenGraph:
    vs = list(vertices)
    return OpenGraph.build(vs, itertools.pairwise(vs), inputs, outputs)


def grid_graph(rows: int, cols: int) -> OpenGraph:
    """A ``rows x cols`` grid with the first column as inputs and the last as outputs.

    Vertex ``(r, c)`` gets id ``r * cols + c``.
    """
    vid = lambda r, c: r * cols + c
    edges = [(vid(r, c), vid(r, c + 1)) for r in range(rows) for c in range(cols - 1)]
    edges += [(vid(r, c), vid(r + 1, c)) for r in range(rows - 1) for c in range(cols)]
    return OpenGraph.build(
        range(rows * cols), edges, [vid(r, 0) for r in range(rows)], [vid(r, cols - 1) for r in range(rows)]
    )
