"""Measurement patterns: commands, runnability, standardization and signal shifting."""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction

from mbqc_compact.flow import Flow
from mbqc_compact.graph import OpenGraph, neighbors

# Angles are exact multiples of pi, stored as Fractions in [0, 2).
Angle = Fraction


class PatternError(ValueError):
    """Raised for patterns that violate a precondition."""


def angle(num: int, den: int = 1) -> Angle:
    return Fraction(num, den) % 2


def angle_to_json(a: Angle) -> dict:
    return {"num": a.numerator, "den": a.denominator}


def angle_from_json(d: dict) -> Angle:
    return angle(int(d["num"]), int(d["den"]))


def is_pauli_x(a: Angle) -> bool:
    """Angle 0 or pi: an X-basis measurement."""
    return a % 1 == 0


def is_pauli_y(a: Angle) -> bool:
    """Angle pi/2 or 3pi/2: a Y-basis measurement."""
    return a % 1 == Fraction(1, 2)


@dataclass(frozen=True)
class N:
    qubit: int


@dataclass(frozen=True)
class E:
    qubits: tuple[int, int]

    def __post_init__(self) -> None:
        a, b = self.qubits
        if a == b:
            raise PatternError(f"entangling a qubit with itself: {a}")
        object.__setattr__(self, "qubits", (min(a, b), max(a, b)))


@dataclass(frozen=True)
class M:
    qubit: int
    angle: Angle = Fraction(0)
    sdep: frozenset[int] = frozenset()
    tdep: frozenset[int] = frozenset()


@dataclass(frozen=True)
class X:
    qubit: int
    dep: frozenset[int]


@dataclass(frozen=True)
class Z:
    qubit: int
    dep: frozenset[int]


@dataclass(frozen=True)
class S:
    qubit: int
    dep: frozenset[int]


Command = N | E | M | X | Z | S


def command_qubits(cmd: Command) -> tuple[int, ...]:
    return cmd.qubits if isinstance(cmd, E) else (cmd.qubit,)


def command_signals(cmd: Command) -> frozenset[int]:
    if isinstance(cmd, M):
        return cmd.sdep | cmd.tdep
    if isinstance(cmd, (X, Z, S)):
        return cmd.dep
    return frozenset()


def command_to_json(cmd: Command) -> dict:
    if isinstance(cmd, N):
        return {"kind": "N", "qubit": cmd.qubit}
    if isinstance(cmd, E):
        return {"kind": "E", "qubits": list(cmd.qubits)}
    if isinstance(cmd, M):
        return {
            "kind": "M",
            "qubit": cmd.qubit,
            "angle": angle_to_json(cmd.angle),
            "sdep": sorted(cmd.sdep),
            "tdep": sorted(cmd.tdep),
        }
    return {"kind": type(cmd).__name__, "qubit": cmd.qubit, "dep": sorted(cmd.dep)}


def command_from_json(d: dict) -> Command:
    kind = d["kind"]
    if kind == "N":
        return N(int(d["qubit"]))
    if kind == "E":
        a, b = d["qubits"]
        return E((int(a), int(b)))
    if kind == "M":
        return M(
            int(d["qubit"]),
            angle_from_json(d.get("angle", {"num": 0, "den": 1})),
            frozenset(d.get("sdep", ())),
            frozenset(d.get("tdep", ())),
        )
    cls = {"X": X, "Z": Z, "S": S}.get(kind)
    if cls is None:
        raise PatternError(f"unknown command kind {kind!r}")
    return cls(int(d["qubit"]), frozenset(d.get("dep", ())))


@dataclass(frozen=True)
class MeasurementPattern:
    """Commands in execution order over the computational space ``space``.

    ``space`` carries vertices, inputs, outputs and the edges entangled by
    the ``E`` commands.
    """

    space: OpenGraph
    commands: tuple[Command, ...] = field(default_factory=tuple)

    def measurements(self) -> list[M]:
        return [c for c in self.commands if isinstance(c, M)]

    def measurement(self, q: int) -> M:
        for c in self.commands:
            if isinstance(c, M) and c.qubit == q:
                return c
        raise PatternError(f"qubit {q} is not measured")

    def angles(self) -> dict[int, Angle]:
        return {m.qubit: m.angle for m in self.measurements()}

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "commands": [command_to_json(c) for c in self.commands]}

    @classmethod
    def from_dict(cls, data: dict) -> MeasurementPattern:
        try:
            space = OpenGraph.from_dict(data["space"])
            cmds = tuple(command_from_json(c) for c in data["commands"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PatternError(f"malformed pattern JSON: {exc}") from exc
        return cls(space, cmds)


def check_runnable(p: MeasurementPattern) -> list[str]:
    """Violations of the runnability conditions R0-R2."""
    errs: list[str] = []
    space = p.space
    alive = set(space.inputs)
    prepared: set[int] = set()
    measured: set[int] = set()
    for n, cmd in enumerate(p.commands):
        for s in command_signals(cmd):
            if s not in measured:
                errs.append(f"R0 at command {n}: signal s{s} used before qubit {s} is measured")
        if isinstance(cmd, N):
            if cmd.qubit in alive or cmd.qubit in measured:
                errs.append(f"R1 at command {n}: qubit {cmd.qubit} prepared twice or prepared as input")
            alive.add(cmd.qubit)
            prepared.add(cmd.qubit)
            continue
        for q in command_qubits(cmd):
            if q not in alive:
                errs.append(f"R1 at command {n}: qubit {q} is not live")
        if isinstance(cmd, M):
            alive.discard(cmd.qubit)
            measured.add(cmd.qubit)
    if measured != set(space.non_outputs):
        errs.append("R2: measured qubits differ from the non-outputs")
    if prepared != set(space.non_inputs):
        errs.append("R2: prepared qubits differ from the non-inputs")
    return errs


def pattern_from_circuit(circuit, start: int = 0) -> MeasurementPattern:
    """Translate a circuit of J and CZ gates gate by gate.

    Each J(theta) on a wire adds a fresh vertex and the commands
    ``N_b E_ab M_a^{-theta} X_b^{s_a}``. Vertex ids are allocated wire by
    wire starting at ``start``, so every wire's vertices are consecutive.
    """
    counts = {w: 0 for w in circuit.wires}
    for g in circuit.gates:
        if g.kind == "J":
            counts[g.qubits[0]] += 1
        elif g.kind not in ("CZ", "E"):
            raise PatternError(f"unsupported gate kind {g.kind!r} in circuit translation")
    first: dict[int, int] = {}
    nxt = start
    for w in circuit.wires:
        first[w] = nxt
        nxt += counts[w] + 1
    frontier = dict(first)
    cmds: list[Command] = []
    edges: list[tuple[int, int]] = []
    for g in circuit.gates:
        if g.kind == "J":
            (w,) = g.qubits
            a = frontier[w]
            b = a + 1
            cmds += [N(b), E((a, b)), M(a, -g.angle % 2), X(b, frozenset({a}))]
            edges.append((a, b))
            frontier[w] = b
        else:
            a, b = (frontier[w] for w in g.qubits)
            cmds.append(E((a, b)))
            edges.append((a, b))
    space = OpenGraph.build(
        range(start, nxt),
        _xor_edges(edges),
        [first[w] for w in circuit.wires],
        [frontier[w] for w in circuit.wires],
    )
    cmds = _cancel_repeated_entanglers(cmds)
    return MeasurementPattern(space, tuple(cmds))


def _xor_edges(edges: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    out: set[tuple[int, int]] = set()
    for a, b in edges:
        out ^= {(min(a, b), max(a, b))}
    return out


def _cancel_repeated_entanglers(cmds: list[Command]) -> list[Command]:
    # repeated CZ gates on one frontier pair only have other entanglers between them
    count: dict[tuple[int, int], int] = {}
    for c in cmds:
        if isinstance(c, E):
            count[c.qubits] = count.get(c.qubits, 0) + 1
    seen: set[tuple[int, int]] = set()
    keep: list[Command] = []
    for c in cmds:
        if isinstance(c, E):
            if count[c.qubits] % 2 == 0 or c.qubits in seen:
                continue
            seen.add(c.qubits)
        keep.append(c)
    return keep


def flow_pattern(fl: Flow, g: OpenGraph, angles: Mapping[int, Angle]) -> MeasurementPattern:
    """The pattern ``prod (X_f(i) Z_{N(f(i))-i} M_i) E_G N_{I^C}`` in flow order."""
    missing = set(fl.f) - set(angles)
    if missing:
        raise PatternError(f"missing measurement angles for {sorted(missing)}")
    cmds: list[Command] = [N(v) for v in sorted(g.non_inputs)]
    cmds += [E(e) for e in sorted(g.edges)]
    for i in flow_order(fl):
        fi = fl.f[i]
        cmds.append(M(i, Fraction(angles[i]) % 2))
        cmds.append(X(fi, frozenset({i})))
        for j in sorted(neighbors(g, fi) - {i}):
            cmds.append(Z(j, frozenset({i})))
    return MeasurementPattern(g, tuple(cmds))


def flow_order(fl: Flow) -> list[int]:
    """Measured vertices, earliest first (largest flow layer), ties by id."""
    return sorted(fl.f, key=lambda v: (-fl.layers[v], v))


def standardize(p: MeasurementPattern) -> MeasurementPattern:
    """Preparations, then entanglement, then measurements, then output corrections.

    Corrections on measured qubits are absorbed into the measurement's
    s- and t-dependencies; corrections crossing an entangler spawn a Z on
    its other end.
    """
    errs = check_runnable(p)
    if errs:
        raise PatternError("cannot standardize a non-runnable pattern: " + "; ".join(errs))
    px: dict[int, frozenset[int]] = {}
    pz: dict[int, frozenset[int]] = {}
    preps: list[N] = []
    ents: list[E] = []
    meas: list[M] = []

    def toggle(d: dict[int, frozenset[int]], q: int, dep: frozenset[int]) -> None:
        d[q] = d.get(q, frozenset()) ^ dep

    for cmd in p.commands:
        if isinstance(cmd, N):
            preps.append(cmd)
        elif isinstance(cmd, E):
            a, b = cmd.qubits
            # E_ab X_a^s  =>  X_a^s Z_b^s E_ab
            if px.get(a):
                toggle(pz, b, px[a])
            if px.get(b):
                toggle(pz, a, px[b])
            ents.append(cmd)
        elif isinstance(cmd, M):
            q = cmd.qubit
            meas.append(
                replace(
                    cmd,
                    sdep=cmd.sdep ^ px.pop(q, frozenset()),
                    tdep=cmd.tdep ^ pz.pop(q, frozenset()),
                )
            )
        elif isinstance(cmd, X):
            toggle(px, cmd.qubit, cmd.dep)
        elif isinstance(cmd, Z):
            toggle(pz, cmd.qubit, cmd.dep)
        else:
            raise PatternError("shift commands cannot be standardized")
    tail: list[Command] = [X(q, d) for q, d in sorted(px.items()) if d]
    tail += [Z(q, d) for q, d in sorted(pz.items()) if d]
    cmds = sorted(preps, key=lambda c: c.qubit) + sorted(ents, key=lambda c: c.qubits) + meas + tail
    return MeasurementPattern(p.space, tuple(cmds))


def measurement_rounds(p: MeasurementPattern) -> dict[int, int]:
    """Earliest round (from 1) of each measurement under its signal dependencies.

    Explicit X/Z corrections on a qubit before its measurement count as
    dependencies of that measurement.
    """
    needs: dict[int, frozenset[int]] = {}
    pending: dict[int, frozenset[int]] = {}
    for c in p.commands:
        if isinstance(c, (X, Z)):
            pending[c.qubit] = pending.get(c.qubit, frozenset()) | c.dep
        elif isinstance(c, M):
            needs[c.qubit] = c.sdep | c.tdep | pending.pop(c.qubit, frozenset())
    rounds: dict[int, int] = {}
    visiting: set[int] = set()

    def visit(q: int) -> int:
        if q in rounds:
            return rounds[q]
        if q in visiting:
            raise PatternError(f"cyclic measurement dependency through {q}")
        visiting.add(q)
        r = 1 + max((visit(d) for d in needs[q] if d in needs), default=0)
        visiting.discard(q)
        rounds[q] = r
        return r

    for q in sorted(needs):
        visit(q)
    return rounds


def pattern_depth(p: MeasurementPattern) -> int:
    """Number of measurement rounds; the final output-correction round is not counted."""
    return max(measurement_rounds(p).values(), default=0)


def canonical(p: MeasurementPattern) -> MeasurementPattern:
    """Standard form with measurements ordered by (round, qubit)."""
    std = p if _is_standard(p) else standardize(p)
    rounds = measurement_rounds(std)
    preps = sorted((c for c in std.commands if isinstance(c, N)), key=lambda c: c.qubit)
    ents = sorted((c for c in std.commands if isinstance(c, E)), key=lambda c: c.qubits)
    meas = sorted(std.measurements(), key=lambda m: (rounds[m.qubit], m.qubit))
    xs = sorted((c for c in std.commands if isinstance(c, X) and c.dep), key=lambda c: c.qubit)
    zs = sorted((c for c in std.commands if isinstance(c, Z) and c.dep), key=lambda c: c.qubit)
    return MeasurementPattern(p.space, tuple(preps + ents + meas + xs + zs))


def _is_standard(p: MeasurementPattern) -> bool:
    rank = {N: 0, E: 1, M: 2, X: 3, Z: 3}
    seen = 0
    measured: set[int] = set()
    for c in p.commands:
        r = rank.get(type(c))
        if r is None or r < seen:
            return False
        seen = r
        if isinstance(c, M):
            measured.add(c.qubit)
        elif isinstance(c, (X, Z)) and c.qubit in measured:
            return False
    return True


def _shift_measurement(cmds: list[Command], pos: int, signals: frozenset[int]) -> None:
    """Apply ``_t[M_k]^s => S_k^t [M_k]^s`` and push the shift to the end."""
    m = cmds[pos]
    assert isinstance(m, M)
    k = m.qubit
    cmds[pos] = replace(m, tdep=m.tdep ^ signals)
    for n in range(pos + 1, len(cmds)):
        c = cmds[n]
        if isinstance(c, M):
            if k in c.sdep:
                c = replace(c, sdep=c.sdep ^ signals)
            if k in c.tdep:
                c = replace(c, tdep=c.tdep ^ signals)
            cmds[n] = c
        elif isinstance(c, (X, Z)) and k in c.dep:
            cmds[n] = replace(c, dep=c.dep ^ signals)


def signal_shift(p: MeasurementPattern, fl: Flow, rng: random.Random | None = None) -> MeasurementPattern:
    """Move every Z-dependency on a measured qubit to the end of the pattern.

    Sources are taken earliest first in flow order; ``rng`` randomizes the
    choice among equally early sources and among pending targets.
    """
    outs = p.space.output_set
    for c in p.commands:
        if isinstance(c, M) and (c.sdep or c.tdep):
            raise PatternError("input is not in flow-pattern form: measurement already dependent")
        if isinstance(c, (X, Z)) and len(c.dep) != 1:
            raise PatternError("input is not in flow-pattern form: correction with several signals")
    std = standardize(p)
    cmds = list(std.commands)
    pos = {c.qubit: n for n, c in enumerate(cmds) if isinstance(c, M)}
    remaining = set(pos)
    if remaining != set(fl.f):
        raise PatternError("flow does not match the measured qubits")
    while remaining:
        top = max(fl.layers[v] for v in remaining)
        ties = sorted(v for v in remaining if fl.layers[v] == top)
        i = rng.choice(ties) if rng else ties[0]
        remaining.discard(i)
        while True:
            pending = sorted(
                k
                for k in remaining
                if i in cmds[pos[k]].tdep  # type: ignore[union-attr]
            )
            if not pending:
                break
            k = rng.choice(pending) if rng else pending[0]
            _shift_measurement(cmds, pos[k], frozenset({i}))
    for c in cmds:
        if isinstance(c, M) and c.tdep:
            raise PatternError(f"signal shifting left a t-dependency on {c.qubit}")
        if isinstance(c, Z) and c.qubit not in outs:
            raise PatternError(f"signal shifting left a Z correction on {c.qubit}")
    return canonical(MeasurementPattern(p.space, tuple(cmds)))


def ssf_pattern(ssf, g: OpenGraph, angles: Mapping[int, Angle]) -> MeasurementPattern:
    """Signal shifted pattern built directly from correcting sets and output Z sets."""
    cmds: list[Command] = [N(v) for v in sorted(g.non_inputs)]
    cmds += [E(e) for e in sorted(g.edges)]
    xdep: dict[int, set[int]] = {}
    zdep: dict[int, set[int]] = {}
    for i, si in ssf.g.items():
        for j in si:
            xdep.setdefault(j, set()).add(i)
        for j in ssf.z.get(i, ()):
            zdep.setdefault(j, set()).add(i)
    for i in sorted(ssf.g):
        cmds.append(M(i, Fraction(angles[i]) % 2, frozenset(xdep.get(i, ()))))
    outs = g.output_set
    cmds += [X(j, frozenset(d)) for j, d in sorted(xdep.items()) if j in outs]
    cmds += [Z(j, frozenset(d)) for j, d in sorted(zdep.items())]
    return canonical(MeasurementPattern(g, tuple(cmds)))


def pauli_simplify(p: MeasurementPattern, rules: Iterable[str] = ("y", "x")) -> MeasurementPattern:
    """Drop or convert X-dependencies of Pauli measurements, then re-shift.

    Rule ``"y"``: at angle pi/2 (mod pi) an X-dependency acts like a
    Z-dependency. Rule ``"x"``: at angle 0 (mod pi) an X-dependency has
    no effect.
    """
    rules = set(rules)
    unknown = rules - {"x", "y"}
    if unknown:
        raise PatternError(f"unknown Pauli rules {sorted(unknown)}")
    cmds = list(canonical(p).commands)
    for n, c in enumerate(cmds):
        if not isinstance(c, M):
            continue
        if "y" in rules and is_pauli_y(c.angle) and c.sdep:
            c = replace(c, sdep=frozenset(), tdep=c.tdep ^ c.sdep)
        elif "x" in rules and is_pauli_x(c.angle) and c.sdep:
            c = replace(c, sdep=frozenset())
        cmds[n] = c
        if c.tdep:
            _shift_measurement(cmds, n, c.tdep)
    return canonical(MeasurementPattern(p.space, tuple(cmds)))


def corrections(p: MeasurementPattern) -> set[tuple[str, int, frozenset[int]]]:
    """X and Z dependencies per qubit, counting measurement s/t-dependencies as corrections."""
    out: set[tuple[str, int, frozenset[int]]] = set()
    for c in p.commands:
        if isinstance(c, M):
            if c.sdep:
                out.add(("X", c.qubit, c.sdep))
            if c.tdep:
                out.add(("Z", c.qubit, c.tdep))
        elif isinstance(c, (X, Z)) and c.dep:
            out.add((type(c).__name__, c.qubit, c.dep))
    return out
