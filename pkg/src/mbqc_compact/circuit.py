"""Circuits over J, CZ, CX and Pauli-Z gates, and the extended translation of patterns."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction

from mbqc_compact.flow import Flow
from mbqc_compact.pattern import (
    Angle,
    M,
    MeasurementPattern,
    X,
    Z,
    angle_from_json,
    angle_to_json,
    measurement_rounds,
)

GATE_KINDS = ("J", "E", "CZ", "CX", "Z")
DIAGONAL = frozenset({"E", "CZ", "Z"})


class CircuitError(ValueError):
    """Raised for malformed circuits."""


@dataclass(frozen=True)
class Gate:
    """A gate. ``E`` is a CZ coming from a graph edge; ``Z`` is a Pauli-Z."""

    kind: str
    qubits: tuple[int, ...]
    angle: Angle | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind in ("J", "Z") else 2
        if len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} gate takes {arity} wires, got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise CircuitError(f"{self.kind} gate on a single wire {self.qubits[0]}")
        if self.kind == "E":
            object.__setattr__(self, "qubits", tuple(sorted(self.qubits)))
        if self.kind == "J":
            object.__setattr__(self, "angle", Fraction(self.angle or 0) % 2)

    @property
    def diagonal(self) -> bool:
        return self.kind in DIAGONAL

    def to_dict(self) -> dict:
        if self.kind in ("J", "Z"):
            d: dict = {"kind": self.kind, "wire": self.qubits[0]}
        elif self.kind == "E":
            d = {"kind": self.kind, "wires": list(self.qubits)}
        else:
            d = {"kind": self.kind, "control": self.qubits[0], "target": self.qubits[1]}
        if self.kind == "J":
            d["angle"] = angle_to_json(self.angle)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Gate:
        """Read ``wire``, ``wires`` or ``control``/``target`` keys; a plain ``qubits`` list also works."""
        kind = d["kind"]
        if "qubits" in d:
            qs = d["qubits"]
        elif "wire" in d:
            qs = [d["wire"]]
        elif "wires" in d:
            qs = d["wires"]
        else:
            qs = [d["control"], d["target"]]
        ang = angle_from_json(d["angle"]) if kind == "J" else None
        return cls(kind, tuple(int(q) for q in qs), ang)

    def __str__(self) -> str:
        if self.kind == "J":
            return f"J{self.qubits[0]}({self.angle}pi)"
        return self.kind + "".join(f"_{q}" for q in self.qubits)


def J(wire: int, theta: Angle | int = 0) -> Gate:
    return Gate("J", (wire,), Fraction(theta))


def CZ(a: int, b: int) -> Gate:
    return Gate("CZ", (a, b))


def CX(control: int, target: int) -> Gate:
    return Gate("CX", (control, target))


def Ent(a: int, b: int) -> Gate:
    return Gate("E", (a, b))


def PauliZ(wire: int) -> Gate:
    return Gate("Z", (wire,))


@dataclass(frozen=True)
class Circuit:
    """Wires start either as an input or in ``|+>``; ``measured`` wires end in a Z measurement."""

    wires: tuple[int, ...]
    initial: Mapping[int, str]
    gates: tuple[Gate, ...] = ()
    measured: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        ws = set(self.wires)
        if len(ws) != len(self.wires):
            raise CircuitError("duplicate wire")
        for w in self.wires:
            if self.initial.get(w, "input") not in ("input", "plus"):
                raise CircuitError(f"bad initial state for wire {w}")
        for g in self.gates:
            if not set(g.qubits) <= ws:
                raise CircuitError(f"gate {g} acts on an unknown wire")
        if not self.measured <= ws:
            raise CircuitError("measured wire not in circuit")

    @classmethod
    def simple(cls, wires: Iterable[int], gates: Iterable[Gate]) -> Circuit:
        ws = tuple(wires)
        return cls(ws, {w: "input" for w in ws}, tuple(gates))

    def inputs(self) -> tuple[int, ...]:
        return tuple(w for w in sorted(self.wires) if self.initial.get(w, "input") == "input")

    def outputs(self) -> tuple[int, ...]:
        return tuple(w for w in sorted(self.wires) if w not in self.measured)

    def to_dict(self) -> dict:
        return {
            "wires": list(self.wires),
            "initial": {str(w): self.initial.get(w, "input") for w in self.wires},
            "gates": [g.to_dict() for g in self.gates],
            "measured": sorted(self.measured),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Circuit:
        try:
            wires = tuple(int(w) for w in d["wires"])
            initial = {int(k): v for k, v in d.get("initial", {}).items()}
            gates = tuple(Gate.from_dict(g) for g in d.get("gates", ()))
            measured = frozenset(int(w) for w in d.get("measured", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise CircuitError(f"malformed circuit JSON: {exc}") from exc
        return cls(wires, {w: initial.get(w, "input") for w in wires}, gates, measured)


@dataclass(frozen=True)
class Slot:
    """A gate tagged with its slice position: layer ``n``, part E/J/C and owning wire."""

    gate: Gate
    layer: int
    part: str
    owner: int | None = None


@dataclass
class SlicedCircuit:
    """An execution-ordered gate list whose gates remember which slice they came from."""

    wires: tuple[int, ...]
    initial: dict[int, str]
    slots: list[Slot] = field(default_factory=list)
    measured: frozenset[int] = frozenset()

    def circuit(self) -> Circuit:
        return Circuit(self.wires, dict(self.initial), tuple(s.gate for s in self.slots), self.measured)

    def jlayers(self) -> int:
        return len({s.layer for s in self.slots if s.gate.kind == "J"})

    def slice(self, layer: int, part: str, owner: int | None = None) -> list[Gate]:
        return [
            s.gate for s in self.slots if s.layer == layer and s.part == part and (owner is None or s.owner == owner)
        ]

    def to_dict(self) -> dict:
        d = self.circuit().to_dict()
        d["slots"] = [{"layer": s.layer, "part": s.part, "owner": s.owner} for s in self.slots]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SlicedCircuit:
        c = Circuit.from_dict(d)
        try:
            tags = d["slots"]
            if len(tags) != len(c.gates):
                raise ValueError("one slot tag per gate expected")
            slots = [Slot(g, int(t["layer"]), str(t["part"]), t.get("owner")) for g, t in zip(c.gates, tags)]
        except (KeyError, TypeError, ValueError) as exc:
            raise CircuitError(f"malformed extended circuit JSON: {exc}") from exc
        return cls(c.wires, dict(c.initial), slots, c.measured)


def extended_translation(p: MeasurementPattern, fl: Flow | None = None) -> SlicedCircuit:
    """One wire per vertex; each measurement becomes a J gate followed by its corrections.

    The pattern must be signal shifted: no t-dependencies and Z corrections
    only on outputs. The gates are arranged in layers ``E_n J_n C_n`` where
    ``n`` is the measurement round; ``C_n`` holds one controlled-correction
    block per measured wire, later flow vertices first when ``fl`` is given.
    """
    space = p.space
    xt: dict[int, set[int]] = {}
    zt: dict[int, set[int]] = {}
    for c in p.commands:
        if isinstance(c, M):
            if c.tdep:
                raise CircuitError(f"measurement of {c.qubit} has a t-dependency; signal shift first")
            for s in c.sdep:
                xt.setdefault(s, set()).add(c.qubit)
        elif isinstance(c, X):
            for s in c.dep:
                xt.setdefault(s, set()).add(c.qubit)
        elif isinstance(c, Z):
            if c.qubit not in space.output_set:
                raise CircuitError(f"Z correction on measured qubit {c.qubit}; signal shift first")
            for s in c.dep:
                zt.setdefault(s, set()).add(c.qubit)
    rounds = measurement_rounds(p)
    angles = p.angles()
    wires = tuple(sorted(space.vertices))
    initial = {v: ("input" if v in space.input_set else "plus") for v in wires}
    slots = [Slot(Ent(a, b), 1, "E") for a, b in sorted(space.edges)]
    depth = max(rounds.values(), default=0)

    def block_key(i: int) -> tuple[int, int]:
        return (fl.layers[i] if fl is not None else 0, i)

    for n in range(1, depth + 1):
        layer = sorted(i for i, r in rounds.items() if r == n)
        slots += [Slot(J(i, -angles[i] % 2), n, "J", i) for i in layer]
        for i in sorted(layer, key=block_key):
            slots += [Slot(CX(i, j), n, "C", i) for j in sorted(xt.get(i, ()))]
            slots += [Slot(CZ(i, j), n, "C", i) for j in sorted(zt.get(i, ()))]
    return SlicedCircuit(wires, initial, slots, frozenset(space.non_outputs))


def gates_on(gates: Sequence[Gate], wire: int) -> list[int]:
    return [n for n, g in enumerate(gates) if wire in g.qubits]


def is_jblock(c: Circuit, i: int, fi: int) -> bool:
    """Whether wires ``i, fi`` carry a contractible ``E_{i,fi} J_i CX_{i,fi}`` block.

    Conditions: ``fi`` starts in ``|+>`` with ``E`` as its first gate,
    ``i`` is measured, the block gates are consecutive on ``i`` and nothing
    touches ``fi`` between ``E`` and ``CX``; after the ``CX`` nothing else
    acts on ``i``.
    """
    if i not in c.measured:
        return False
    if c.initial.get(fi) != "plus":
        return False
    on_i = gates_on(c.gates, i)
    on_f = gates_on(c.gates, fi)
    if len(on_i) < 3 or len(on_f) < 2:
        return False
    e, jg, cx = (c.gates[n] for n in on_i[-3:])
    if e != Ent(i, fi) or jg.kind != "J" or cx != CX(i, fi):
        return False
    return on_f[0] == on_i[-3] and on_f[1] == on_i[-1]


def apply_jgate_identity(c: Circuit, i: int, fi: int) -> Circuit:
    """Contract the block on ``i, fi`` into one J gate on ``fi`` and drop wire ``i``."""
    if not is_jblock(c, i, fi):
        raise CircuitError(f"wires {i}, {fi} do not form a contractible J block")
    on_i = gates_on(c.gates, i)
    e_pos, j_pos, cx_pos = on_i[-3:]
    theta = c.gates[j_pos].angle
    out: list[Gate] = []
    for n, g in enumerate(c.gates):
        if n in (e_pos, j_pos):
            continue
        if n == cx_pos:
            out.append(J(fi, theta))
        elif i in g.qubits:
            out.append(replace(g, qubits=tuple(fi if q == i else q for q in g.qubits)))
        else:
            out.append(g)
    initial = {w: s for w, s in c.initial.items() if w != i}
    initial[fi] = c.initial.get(i, "input")
    wires = tuple(w for w in c.wires if w != i)
    return Circuit(wires, initial, tuple(out), c.measured - {i})


def gate_layers(c: Circuit) -> list[int]:
    """ASAP layer (from 1) of every gate."""
    last: dict[int, int] = {}
    out = []
    for g in c.gates:
        lvl = 1 + max((last.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            last[q] = lvl
        out.append(lvl)
    return out


def j_depth(c: Circuit) -> int:
    """Largest number of J gates on any causal chain of gates."""
    best: dict[int, int] = {}
    top = 0
    for g in c.gates:
        v = max((best.get(q, 0) for q in g.qubits), default=0) + (g.kind == "J")
        for q in g.qubits:
            best[q] = v
        top = max(top, v)
    return top


@dataclass(frozen=True)
class CircuitStats:
    wires: int
    jgates: int
    jlayers: int
    depth: int
    maxdeg: int

    def to_dict(self) -> dict:
        return {
            "wires": self.wires,
            "jgates": self.jgates,
            "jlayers": self.jlayers,
            "depth": self.depth,
            "maxdeg": self.maxdeg,
        }


def circuit_stats(c: Circuit) -> CircuitStats:
    """Counts and depths; ``maxdeg`` is the largest number of two-wire gates on one wire."""
    layers = gate_layers(c)
    deg: dict[int, int] = {}
    for g in c.gates:
        if len(g.qubits) == 2:
            for q in g.qubits:
                deg[q] = deg.get(q, 0) + 1
    return CircuitStats(
        wires=len(c.wires),
        jgates=sum(g.kind == "J" for g in c.gates),
        jlayers=j_depth(c),
        depth=max(layers, default=0),
        maxdeg=max(deg.values(), default=0),
    )


def to_dot(c: Circuit) -> str:
    """Graphviz rendering: one chain of nodes per wire, two-wire gates joined by dashed edges."""
    lines = ["digraph circuit {", "  rankdir=LR;", "  node [shape=box, fontsize=10];"]
    prev = {}
    for w in sorted(c.wires):
        label = "in" if c.initial.get(w, "input") == "input" else "|+>"
        lines.append(f'  w{w}_start [label="{w}: {label}", shape=plaintext];')
        prev[w] = f"w{w}_start"
    for n, g in enumerate(c.gates):
        node = f"g{n}"
        lines.append(f'  {node} [label="{g}"];')
        for q in g.qubits:
            lines.append(f"  {prev[q]} -> {node};")
            prev[q] = node
    for w in sorted(c.wires):
        end = "M" if w in c.measured else "out"
        lines.append(f'  w{w}_end [label="{end}", shape=plaintext];')
        lines.append(f"  {prev[w]} -> w{w}_end;")
    lines.append("}")
    return "\n".join(lines) + "\n"
