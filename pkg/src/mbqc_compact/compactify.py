"""Rewriting extended circuits into compact circuits with one wire per input.

The correction block ``c_{n,i}`` (all CX/CZ gates controlled by wire ``i``)
is kept as a single controlled Pauli operator. Moving a Clifford gate past
the block conjugates that operator, which is exactly the repeated use of
the CZ/CX commutation identities; the block is re-expanded into CX gates,
CZ gates and, when the conjugation produced a sign, a Pauli Z on ``i``.
"""

from __future__ import annotations

import copy
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from mbqc_compact.circuit import (
    CX,
    CZ,
    Circuit,
    Ent,
    Gate,
    PauliZ,
    SlicedCircuit,
    Slot,
    apply_jgate_identity,
    is_jblock,
)
from mbqc_compact.flow import Flow, GFlow
from mbqc_compact.graph import (
    OpenGraph,
    neighborhood_of_set,
    neighbors,
    odd_neighborhood,
)

log = logging.getLogger(__name__)


class CompactifyError(RuntimeError):
    """An internal invariant of the rewriting failed, or the input is not an SSF extended circuit."""

    def __init__(self, message: str, trace: CompactifyTrace | None = None) -> None:
        super().__init__(message)
        self.trace = trace


class RewriteError(ValueError):
    """The site handed to a circuit identity does not match its left-hand side."""


# ---------------------------------------------------------------------------
# gate commutation


def commutes(a: Gate, b: Gate) -> bool:
    """Syntactic commutation test for the gate set used here."""
    shared = set(a.qubits) & set(b.qubits)
    if not shared:
        return True
    if a.kind == "J" or b.kind == "J":
        return False
    if a.diagonal and b.diagonal:
        return True
    if a.kind == "CX" and b.kind == "CX":
        (ca, ta), (cb, tb) = a.qubits, b.qubits
        return ca != tb and ta != cb
    cx, diag = (a, b) if a.kind == "CX" else (b, a)
    return cx.qubits[1] not in diag.qubits


# ---------------------------------------------------------------------------
# controlled Pauli blocks


@dataclass
class PauliString:
    """``i^phase * Z^z X^x``, the X part acting first."""

    x: set[int] = field(default_factory=set)
    z: set[int] = field(default_factory=set)
    phase: int = 0

    def copy(self) -> PauliString:
        return PauliString(set(self.x), set(self.z), self.phase)

    def mul(self, other: PauliString) -> PauliString:
        """Operator product ``self * other``."""
        # (Z^a X^b)(Z^c X^d) = (-1)^{b.c} Z^{a+c} X^{b+d}
        sign = 2 * (len(self.x & other.z) % 2)
        return PauliString(self.x ^ other.x, self.z ^ other.z, (self.phase + other.phase + sign) % 4)


def _conj_single(g: Gate, kind: str, q: int) -> PauliString:
    """Image of X_q or Z_q under conjugation by the Clifford gate ``g``."""
    base = PauliString({q}, set()) if kind == "X" else PauliString(set(), {q})
    if q not in g.qubits:
        return base
    if g.kind in ("E", "CZ"):
        a, b = g.qubits
        other = b if q == a else a
        return PauliString({q}, {other}) if kind == "X" else base
    if g.kind == "CX":
        c, t = g.qubits
        if kind == "X" and q == c:
            return PauliString({c, t}, set())
        if kind == "Z" and q == t:
            return PauliString(set(), {c, t})
        return base
    if g.kind == "Z":
        return PauliString({q}, set(), 2) if kind == "X" else base
    raise RewriteError(f"cannot conjugate a Pauli by non-Clifford gate {g}")


def conjugate(p: PauliString, g: Gate) -> PauliString:
    """``g p g^dagger`` for a self-inverse Clifford gate ``g``."""
    out = PauliString(phase=p.phase)
    for q in sorted(p.z):
        out = out.mul(_conj_single(g, "Z", q))
    for q in sorted(p.x):
        out = out.mul(_conj_single(g, "X", q))
    return out


@dataclass(eq=False)
class _Block:
    owner: int
    layer: int
    pauli: PauliString

    def gates(self) -> list[Gate]:
        i = self.owner
        out = [CX(i, t) for t in sorted(self.pauli.x)]
        out += [CZ(i, t) for t in sorted(self.pauli.z)]
        if self.pauli.phase == 2:
            out.append(PauliZ(i))
        elif self.pauli.phase != 0:
            raise CompactifyError(f"correction block of wire {i} acquired an imaginary phase")
        return out

    def touches(self, q: int) -> bool:
        return q == self.owner or q in self.pauli.x or q in self.pauli.z


@dataclass(eq=False)
class _Item:
    gate: Gate
    layer: int
    part: str
    owner: int | None = None
    origin: tuple[int, int] | None = None

    def touches(self, q: int) -> bool:
        return q in self.gate.qubits


def _commutes_item(g: Gate, item) -> bool:
    if isinstance(item, _Block):
        return all(commutes(g, h) for h in item.gates())
    return commutes(g, item.gate)


# ---------------------------------------------------------------------------
# invocations and trace


@dataclass(frozen=True)
class RPInvocation:
    procedure: str
    target: int
    neighbor: int
    layer: int
    correcting: tuple[int, ...]
    # (mode, j) pairs: "E" moves E_{kj}; "CX" moves an existing CX_{j,f(k)}; "skip" is already past
    steps: tuple[tuple[str, int], ...] = ()

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "target": self.target,
            "neighbor": self.neighbor,
            "layer": self.layer,
            "correcting": list(self.correcting),
        }


@dataclass(frozen=True)
class Abort:
    target: int
    neighbor: int
    reason: str

    def to_dict(self) -> dict:
        return {"event": "abort", "target": self.target, "neighbor": self.neighbor, "reason": self.reason}


@dataclass
class CompactifyTrace:
    events: list[dict] = field(default_factory=list)
    origin: dict[int, int] = field(default_factory=dict)

    def rp_events(self) -> list[dict]:
        return [e for e in self.events if e["event"] == "rp"]

    def aborts(self) -> list[dict]:
        return [e for e in self.events if e["event"] == "abort"]

    def to_dict(self) -> dict:
        return {"events": self.events, "origin": {str(k): v for k, v in sorted(self.origin.items())}}


# ---------------------------------------------------------------------------
# rewrite state


@dataclass
class CompactionState:
    """Working copy of an extended circuit during compactification."""

    wires: tuple[int, ...]
    initial: dict[int, str]
    measured: frozenset[int]
    items: list
    blocks: dict[int, _Block]
    jslice: dict[int, int]
    graph: OpenGraph
    flow: Flow
    corr: Mapping[int, frozenset[int]]
    trace: CompactifyTrace = field(default_factory=CompactifyTrace)
    consumed: set[tuple[int, int]] = field(default_factory=set)
    strict: bool = True

    @classmethod
    def from_extended(
        cls, c: SlicedCircuit, fl: Flow, g: OpenGraph, corr: Mapping[int, frozenset[int]]
    ) -> CompactionState:
        items: list = []
        blocks: dict[int, _Block] = {}
        jslice: dict[int, int] = {}
        for s in c.slots:
            gt = s.gate
            if s.part == "C":
                blk = blocks.get(s.owner)
                if blk is None:
                    blk = blocks[s.owner] = _Block(s.owner, s.layer, PauliString())
                    items.append(blk)
                elif items[-1] is not blk:
                    raise CompactifyError(f"correction block of wire {s.owner} is not contiguous")
                if gt.kind == "CX":
                    blk.pauli.x ^= {gt.qubits[1]}
                elif gt.kind == "CZ":
                    # CZ gates follow the CX gates, matching the Z^z X^x form
                    blk.pauli.z ^= {gt.qubits[1]}
                else:
                    raise CompactifyError(f"unexpected gate {gt} in a correction block")
                continue
            if gt.kind == "J":
                jslice[gt.qubits[0]] = s.layer
            items.append(_Item(gt, s.layer, s.part, s.owner))
        # a measured wire without corrections gets an empty block right after its J gate
        for i in sorted(set(jslice) - set(blocks)):
            pos = next(
                n
                for n, it in enumerate(items)
                if isinstance(it, _Item) and it.gate.kind == "J" and it.gate.qubits[0] == i
            )
            blocks[i] = _Block(i, jslice[i], PauliString())
            items.insert(pos + 1, blocks[i])
        return cls(tuple(c.wires), dict(c.initial), c.measured, items, blocks, jslice, g, fl, corr)

    # -- lookups ----------------------------------------------------------

    def index(self, obj) -> int:
        for n, it in enumerate(self.items):
            if it is obj:
                return n
        raise CompactifyError("item vanished from the circuit")

    def find_gate(self, gate: Gate) -> _Item | None:
        for it in self.items:
            if isinstance(it, _Item) and it.gate == gate:
                return it
        return None

    def _path_clear(self, gate: Gate, lo: int, hi: int, ignore: Iterable = ()) -> bool:
        """Whether ``gate`` commutes with every item strictly between positions ``lo`` and ``hi``."""
        skip = {id(x) for x in ignore}
        return all(_commutes_item(gate, self.items[n]) for n in range(lo + 1, hi) if id(self.items[n]) not in skip)

    def _fresh_until(self, q: int, item) -> bool:
        """Whether wire ``q`` is still ``|+>`` when ``item`` acts.

        Earlier gates may only be CX gates targeting ``q``, which fix ``|+>``.
        """
        if self.initial.get(q) != "plus":
            return False
        for it in self.items:
            if it is item:
                return True
            if not it.touches(q):
                continue
            if isinstance(it, _Block):
                if q in it.pauli.z:
                    return False
            elif not (it.gate.kind == "CX" and it.gate.qubits[1] == q):
                return False
        return False

    def gates(self) -> list[Gate]:
        out: list[Gate] = []
        for it in self.items:
            out += it.gates() if isinstance(it, _Block) else [it.gate]
        return out

    def circuit(self) -> Circuit:
        return Circuit(self.wires, dict(self.initial), tuple(self.gates()), self.measured)

    def sliced(self) -> SlicedCircuit:
        slots: list[Slot] = []
        for it in self.items:
            if isinstance(it, _Block):
                slots += [Slot(g, it.layer, "C", it.owner) for g in it.gates()]
            else:
                slots.append(Slot(it.gate, it.layer, it.part, it.owner))
        return SlicedCircuit(self.wires, dict(self.initial), slots, self.measured)

    # -- procedure selection ---------------------------------------------

    def procedure_for(self, i: int, k: int) -> str:
        """The procedure whose first condition holds for target ``i`` and neighbour ``k``."""
        later = k not in self.jslice or self.jslice[k] > self.jslice[i]
        if later or k in self.corr[i]:
            return "RP1"
        fk = self.flow.f.get(k)
        return "RP2" if fk in self.corr[i] else "RP3"

    def choose_rp(self, i: int, k: int) -> RPInvocation | Abort:
        """Pick the procedure for ``(i, k)`` and check it by a dry run on a copy."""
        if self.blocks.get(i) is None:
            return Abort(i, k, f"wire {i} has no correction block")
        proc = self.procedure_for(i, k)
        trial = copy.deepcopy(self)
        try:
            steps = trial._execute(proc, i, k)
        except _Blocked as exc:
            return Abort(i, k, str(exc))
        return RPInvocation(proc, i, k, self.jslice[i], self._correcting(proc, i, k), tuple(steps))

    def _correcting(self, proc: str, i: int, k: int) -> tuple[int, ...]:
        js = self.corr[i] & neighbors(self.graph, k)
        if proc != "RP1":
            js = js - {self.flow.f[k]}
        return tuple(sorted(js))

    def _execute(self, proc: str, i: int, k: int) -> list[tuple[str, int]]:
        blk = self.blocks[i]
        steps: list[tuple[str, int]] = []
        self._log = {"moved": [], "created": []}
        if proc == "RP1":
            js = self._correcting(proc, i, k)
            moving = []
            for j in js:
                e = self.find_gate(Ent(k, j))
                if e is None or self.index(e) > self.index(blk):
                    steps.append(("skip", j))
                    continue
                moving.append(e)
                steps.append(("E", j))
            bpos = self.index(blk)
            for e in moving:
                if not self._path_clear(e.gate, self.index(e), bpos, moving):
                    raise _Blocked(f"{e.gate} cannot be pushed to the correction block of {i}")
            for e in moving:
                self._log["moved"].append(str(e.gate))
                self._cross(blk, e)
            return steps
        if k not in self.flow.f:
            raise _Blocked(f"neighbour {k} has no flow successor")
        fk = self.flow.f[k]
        for j in self._correcting(proc, i, k):
            e = self.find_gate(Ent(k, j))
            if e is not None:
                if self.index(e) > self.index(blk):
                    raise _Blocked(f"{e.gate} already lies past the correction block of {i}")
                item = self._convert(e, k, j, fk, blk)
                steps.append(("E", j))
            else:
                item = self.find_gate(CX(j, fk))
                if item is None or self.index(item) > self.index(blk):
                    raise _Blocked(f"neither E_{k}_{j} nor CX_{j}_{fk} is available")
                steps.append(("CX", j))
            if not self._path_clear(item.gate, self.index(item), self.index(blk)):
                raise _Blocked(f"{item.gate} cannot be pushed to the correction block of {i}")
            self._log["moved"].append(str(item.gate))
            self._cross(blk, item)
        return steps

    def _convert(self, e: _Item, k: int, j: int, fk: int, blk: _Block) -> _Item:
        """Identity (b): ``E_{k,fk} E_{kj}`` on fresh ``fk`` becomes ``E_{k,fk} CX_{j,fk}``."""
        efk = self.find_gate(Ent(k, fk))
        if efk is None:
            raise _Blocked(f"E_{k}_{fk} is missing")
        pe, pf = self.index(e), self.index(efk)
        if pe > pf and self._path_clear(e.gate, pf, pe, [efk]):
            # bring E_{kj} back to just after E_{k,fk}
            self.items.remove(e)
            self.items.insert(self.index(efk) + 1, e)
        elif pe > pf and self._path_clear(efk.gate, pf, pe):
            # or bring E_{k,fk} forward to just before E_{kj}
            self.items.remove(efk)
            self.items.insert(self.index(e), efk)
        elif pe < pf and self._path_clear(e.gate, pe, pf + 1, [efk]):
            self.items.remove(e)
            self.items.insert(self.index(efk) + 1, e)
        else:
            raise _Blocked(f"{e.gate} cannot be brought next to {efk.gate}")
        if not self._fresh_until(fk, efk):
            raise _Blocked(f"wire {fk} is not fresh at {efk.gate}")
        pos = self.index(e)
        self.items[pos] = cx = _Item(CX(j, fk), blk.layer + 1, "E", None, e.gate.qubits)
        self.consumed.add(e.gate.qubits)
        self._log["created"].append({"gate": str(cx.gate), "from": list(e.gate.qubits)})
        return cx

    # -- application -----------------------------------------------------

    def _cross(self, blk: _Block, item: _Item) -> None:
        """Move ``item`` from before ``blk`` to immediately after it."""
        if blk.owner in item.gate.qubits:
            raise CompactifyError(f"gate {item.gate} touches the control of block {blk.owner}")
        self.items.remove(item)
        blk.pauli = conjugate(blk.pauli, item.gate)
        item.layer = max(item.layer, blk.layer + 1)
        item.part = "E"
        pos = self.index(blk) + 1
        # drift on as late as commutation allows
        while pos < len(self.items) and _commutes_item(item.gate, self.items[pos]):
            pos += 1
        self.items.insert(pos, item)

    def apply(self, inv: RPInvocation) -> dict:
        blk = self.blocks[inv.target]
        i, k = inv.target, inv.neighbor
        before = blk.pauli.copy()
        try:
            self._execute(inv.procedure, i, k)
        except _Blocked as exc:
            raise CompactifyError(f"{inv.procedure} on ({i}, {k}) failed: {exc}", self.trace) from None
        after = blk.pauli
        event = {
            "event": "rp",
            **inv.to_dict(),
            "moved": self._log["moved"],
            "created": self._log["created"],
            "block_removed": _pauli_diff(i, before, after),
            "block_added": _pauli_diff(i, after, before),
        }
        self.trace.events.append(event)
        problem = None
        if inv.procedure == "RP1" and k in after.z:
            problem = f"CZ_{i}_{k} survived RP1"
        if inv.procedure != "RP1" and self.flow.f[k] in after.x:
            problem = f"CX_{i}_{self.flow.f[k]} survived {inv.procedure}"
        if problem is not None:
            # every step is an exact identity, so a lenient run may go on
            if self.strict:
                raise CompactifyError(problem, self.trace)
            self.trace.events.append(Abort(i, k, problem).to_dict())
        return event

    def __deepcopy__(self, memo):
        # the trace is shared: dry runs never write to it
        dup = copy.copy(self)
        memo[id(self)] = dup
        dup.items = copy.deepcopy(self.items, memo)
        dup.blocks = {i: memo.get(id(b), b) for i, b in self.blocks.items()}
        dup.consumed = set(self.consumed)
        return dup


class _Blocked(Exception):
    pass


def _pauli_diff(i: int, a: PauliString, b: PauliString) -> list[str]:
    out = [str(CX(i, t)) for t in sorted(a.x - b.x)]
    out += [str(CZ(i, t)) for t in sorted(a.z - b.z)]
    if a.phase == 2 and b.phase != 2:
        out.append(str(PauliZ(i)))
    return out


# ---------------------------------------------------------------------------
# public procedure entry points


def choose_rp(state: CompactionState, i: int, k: int) -> RPInvocation | Abort:
    return state.choose_rp(i, k)


def _run_rp(state: CompactionState, i: int, k: int, allowed: set[str]) -> CompactionState:
    inv = state.choose_rp(i, k)
    if isinstance(inv, Abort):
        raise CompactifyError(inv.reason, state.trace)
    if inv.procedure not in allowed:
        raise CompactifyError(f"({i}, {k}) calls for {inv.procedure}, not {'/'.join(sorted(allowed))}")
    state.apply(inv)
    return state


def rp1(state: CompactionState, i: int, k: int) -> CompactionState:
    return _run_rp(state, i, k, {"RP1"})


def rp2(state: CompactionState, i: int, k: int) -> CompactionState:
    return _run_rp(state, i, k, {"RP2"})


def rp3(state: CompactionState, i: int, k: int) -> CompactionState:
    return _run_rp(state, i, k, {"RP3"})


# ---------------------------------------------------------------------------
# the five two-gate identities on flat circuits


def rewrite_identity(kind: str, c: Circuit, site: int) -> Circuit:
    """Rewrite gates ``site`` and ``site + 1`` of ``c`` with identity ``kind``.

    a: ``CX_ij, E_kj -> E_kj, CX_ij, CZ_ik``
    b: ``E_k,fk, E_jk -> E_k,fk, CX_j,fk`` when ``E_k,fk`` is the first gate on a ``|+>`` wire ``fk``
    c: ``CX_ij, CX_jt -> CX_jt, CX_ij, CX_it``
    d: ``E_kj, CX_ij -> CX_ij, E_kj, CZ_ik``
    e: ``CX_jt, CX_ij -> CX_ij, CX_jt, CX_it``
    """
    gs = list(c.gates)
    if not 0 <= site < len(gs) - 1:
        raise RewriteError(f"site {site} out of range")
    g1, g2 = gs[site], gs[site + 1]
    new: list[Gate]
    if kind in ("a", "d"):
        cx, e = (g1, g2) if kind == "a" else (g2, g1)
        if cx.kind != "CX" or e.kind not in ("E", "CZ"):
            raise RewriteError(f"identity ({kind}) needs a CX and an E gate")
        i, j = cx.qubits
        if j not in e.qubits or i in e.qubits:
            raise RewriteError(f"identity ({kind}) needs the E gate on the CX target only")
        k = e.qubits[0] if e.qubits[1] == j else e.qubits[1]
        new = [e, cx, CZ(i, k)] if kind == "a" else [cx, e, CZ(i, k)]
    elif kind in ("c", "e"):
        first, second = (g1, g2) if kind == "c" else (g2, g1)
        if first.kind != "CX" or second.kind != "CX" or first.qubits[1] != second.qubits[0]:
            raise RewriteError(f"identity ({kind}) needs CX_ij and CX_jt")
        i, j = first.qubits
        t = second.qubits[1]
        if t == i:
            raise RewriteError(f"identity ({kind}) needs three distinct wires")
        new = [second, first, CX(i, t)] if kind == "c" else [first, second, CX(i, t)]
    elif kind == "b":
        if g1.kind != "E" or g2.kind not in ("E", "CZ"):
            raise RewriteError("identity (b) needs two E gates")
        shared = set(g1.qubits) & set(g2.qubits)
        if len(shared) != 1:
            raise RewriteError("identity (b) needs E gates sharing one wire")
        (k,) = shared
        fk = g1.qubits[0] if g1.qubits[1] == k else g1.qubits[1]
        j = g2.qubits[0] if g2.qubits[1] == k else g2.qubits[1]
        if c.initial.get(fk) != "plus" or any(fk in g.qubits for g in gs[:site]):
            raise RewriteError(f"identity (b) needs wire {fk} fresh in |+>")
        new = [g1, CX(j, fk)]
    else:
        raise RewriteError(f"unknown identity {kind!r}")
    return Circuit(c.wires, dict(c.initial), tuple(gs[:site] + new + gs[site + 2 :]), c.measured)


# ---------------------------------------------------------------------------
# Algorithm driver


def _check_ssf_blocks(c: SlicedCircuit, g: OpenGraph, ssf: GFlow) -> list[str]:
    problems = []
    outs = g.output_set
    for i, si in ssf.g.items():
        got_x = {s.gate.qubits[1] for s in c.slots if s.part == "C" and s.owner == i and s.gate.kind == "CX"}
        got_z = {s.gate.qubits[1] for s in c.slots if s.part == "C" and s.owner == i and s.gate.kind == "CZ"}
        if got_x != set(si):
            problems.append(f"corrections of {i} target {sorted(got_x)}, expected {sorted(si)}")
        want_z = set(odd_neighborhood(g, si) & outs)
        if got_z != want_z:
            problems.append(f"Z corrections of {i} target {sorted(got_z)}, expected {sorted(want_z)}")
    return problems


def _graph_of(c: SlicedCircuit) -> OpenGraph:
    edges = {s.gate.qubits for s in c.slots if s.gate.kind == "E"}
    ins = [w for w in c.wires if c.initial.get(w) == "input"]
    outs = [w for w in c.wires if w not in c.measured]
    return OpenGraph.build(c.wires, edges, ins, outs)


def _start(c: SlicedCircuit, fl: Flow, ssf: GFlow | None, pauli: bool) -> CompactionState:
    g = _graph_of(c)
    if pauli:
        corr = {
            i: frozenset(s.gate.qubits[1] for s in c.slots if s.part == "C" and s.owner == i and s.gate.kind == "CX")
            for i in g.non_outputs
        }
    else:
        if ssf is None:
            raise CompactifyError("a signal shifted flow is required unless pauli=True")
        problems = _check_ssf_blocks(c, g, ssf)
        if problems:
            raise CompactifyError(
                "input is not the extended circuit of this signal shifted flow "
                "(Pauli-simplified patterns need pauli=True): " + "; ".join(problems)
            )
        corr = {i: frozenset(s) for i, s in ssf.g.items()}
    state = CompactionState.from_extended(c, fl, g, corr)
    state.strict = not pauli
    state.trace.origin = {w: w for w in c.wires}
    return state


def _finish(state: CompactionState, fl: Flow) -> Circuit:
    trace, strict = state.trace, state.strict
    gates = [(gt, it) for it in state.items for gt in (it.gates() if isinstance(it, _Block) else [it.gate])]
    gates = _drop_trailing_z(gates, state.measured, trace)
    gates = _remove_cx_on_plus(gates, fl, state.initial, trace, strict=strict)
    circ = Circuit(state.wires, dict(state.initial), tuple(gt for gt, _ in gates), state.measured)
    circ = _fold_jblocks(circ, fl, trace, strict=strict)
    n_in = len(state.graph.inputs)
    if strict and len(circ.wires) != n_in:
        raise CompactifyError(f"compact circuit has {len(circ.wires)} wires, expected {n_in}", trace)
    return circ


def compactify(
    c: SlicedCircuit, fl: Flow, ssf: GFlow | None = None, *, pauli: bool = False
) -> tuple[Circuit, CompactifyTrace]:
    """Rewrite an SSF extended circuit until every measured wire folds into its flow successor.

    With ``pauli=True`` the correcting sets are read from the circuit
    itself (as produced from a Pauli-simplified pattern) and the rewriting
    is best effort: aborted procedures are recorded and wires whose J block
    cannot be formed are kept.
    """
    state = _start(c, fl, ssf, pauli)
    g, corr, trace = state.graph, state.corr, state.trace
    depth = max(state.jslice.values(), default=0)
    for n in range(1, depth + 1):
        targets = sorted((i for i, m in state.jslice.items() if m == n), key=lambda v: (fl.layers[v], v))
        for i in targets:
            nbrs = neighborhood_of_set(g, corr[i]) - {i}
            for k in sorted(nbrs, key=lambda v: (fl.layers[v], v)):
                inv = state.choose_rp(i, k)
                if isinstance(inv, Abort):
                    trace.events.append(inv.to_dict())
                    log.debug("abort at (%d, %d): %s", i, k, inv.reason)
                    if not pauli:
                        raise CompactifyError(f"rewrite aborted at ({i}, {k}): {inv.reason}", trace)
                    continue
                state.apply(inv)
    return _finish(state, fl), trace


def replay(
    c: SlicedCircuit, fl: Flow, trace: CompactifyTrace, ssf: GFlow | None = None, *, pauli: bool = False
) -> Circuit:
    """Apply the procedures recorded in ``trace`` in order, then the same cleanup as ``compactify``."""
    state = _start(c, fl, ssf, pauli)
    for e in trace.rp_events():
        i, k = e["target"], e["neighbor"]
        inv = state.choose_rp(i, k)
        if isinstance(inv, Abort):
            raise CompactifyError(f"replay aborted at ({i}, {k}): {inv.reason}", state.trace)
        if inv.procedure != e["procedure"]:
            raise CompactifyError(f"replay picked {inv.procedure} at ({i}, {k}), trace has {e['procedure']}")
        state.apply(inv)
    return _finish(state, fl)


def _drop_trailing_z(gates: list, measured: frozenset[int], trace: CompactifyTrace) -> list:
    out = list(gates)
    n = 0
    while n < len(out):
        gt, _ = out[n]
        if gt.kind == "Z" and gt.qubits[0] in measured:
            q = gt.qubits[0]
            later = [h for h, _ in out[n + 1 :] if q in h.qubits]
            if all(commutes(gt, h) for h in later):
                trace.events.append({"event": "trailing_z", "wire": q})
                del out[n]
                continue
        n += 1
    return out


def _remove_cx_on_plus(gates: list, fl: Flow, initial: Mapping[int, str], trace: CompactifyTrace, strict: bool) -> list:
    out = []
    for gt, it in gates:
        is_corr = isinstance(it, _Block) and gt.kind == "CX"
        if is_corr and gt.qubits[1] != fl.f.get(gt.qubits[0]):
            _i, j = gt.qubits
            fresh = initial.get(j) == "plus" and not any(j in h.qubits for h, _ in out)
            if fresh:
                trace.events.append({"event": "cx_on_plus", "gate": str(gt)})
                continue
            if strict:
                raise CompactifyError(f"{gt} cannot be removed: wire {j} is not fresh in |+>", trace)
        out.append((gt, it))
    return out


def _slide_late(c: Circuit, i: int, fi: int) -> Circuit:
    """Move ``E_{i,fi}`` as late as commutation allows, stopping before ``J_i``."""
    gs = list(c.gates)
    e = Ent(i, fi)
    if e not in gs:
        return c
    p = gs.index(e)
    q = p
    while q + 1 < len(gs):
        h = gs[q + 1]
        if h.kind == "J" and h.qubits[0] == i:
            break
        if not commutes(e, h):
            break
        q += 1
    gs.insert(q, gs.pop(p))
    return Circuit(c.wires, dict(c.initial), tuple(gs), c.measured)


def _fold_jblocks(c: Circuit, fl: Flow, trace: CompactifyTrace, strict: bool) -> Circuit:
    order = sorted(fl.f, key=lambda v: (-fl.layers[v], v))
    for i in order:
        fi = fl.f[i]
        if i not in c.wires:
            continue
        cand = _slide_late(c, i, fi)
        if not is_jblock(cand, i, fi):
            trace.events.append({"event": "jblock_missing", "wire": i})
            if strict:
                raise CompactifyError(f"wires {i}, {fi} do not form a J block", trace)
            continue
        c = apply_jgate_identity(cand, i, fi)
        trace.origin[fi] = trace.origin.pop(i, i)
        trace.events.append({"event": "j_identity", "wire": i, "successor": fi})
    trace.origin = {w: trace.origin.get(w, w) for w in c.wires}
    return c
