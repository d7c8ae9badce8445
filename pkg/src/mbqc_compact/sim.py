"""Dense statevector simulation of circuits and measurement patterns.

Basis states are little-endian over wires sorted by id: the smallest wire
id is the least significant bit. All simulations carry a trailing batch
axis so that a whole input basis can be pushed through at once.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from mbqc_compact.circuit import Circuit, Gate
from mbqc_compact.pattern import E, M, MeasurementPattern, N, X, Z

NORM_TOL = 1e-12
EQUIV_TOL = 1e-9
MAX_UNITARY_WIRES = 10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


class SimulationError(ValueError):
    """Raised when a simulation request is out of range or malformed."""


def j_matrix(theta: float) -> np.ndarray:
    """``J(theta) = H diag(1, e^{i theta})``, with ``theta`` in radians."""
    ph = np.exp(1j * theta)
    return np.array([[1, ph], [1, -ph]], dtype=complex) / np.sqrt(2)


@dataclass
class StateVector:
    """Amplitudes of shape ``(2^n, batch)`` over ``qubits`` (little-endian)."""

    qubits: list[int]
    amps: np.ndarray

    def norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.amps) ** 2, axis=0)


class _Register:
    """A tensor of shape ``(2,)*n + (batch,)`` with qubit-to-axis bookkeeping."""

    def __init__(self, qubits: Sequence[int], data: np.ndarray) -> None:
        self.qubits = list(qubits)
        self.t = data

    @classmethod
    def identity(cls, qubits: Sequence[int]) -> _Register:
        n = len(qubits)
        eye = np.eye(2**n, dtype=complex)
        return cls(qubits, _from_little_endian(eye, n))

    def axis(self, q: int) -> int:
        try:
            return self.qubits.index(q)
        except ValueError:
            raise SimulationError(f"qubit {q} is not live") from None

    def add_plus(self, q: int) -> None:
        self.t = np.multiply.outer(_PLUS, self.t)
        self.qubits.insert(0, q)

    def apply1(self, q: int, u: np.ndarray) -> None:
        ax = self.axis(q)
        self.t = np.moveaxis(np.tensordot(u, self.t, axes=([1], [ax])), 0, ax)

    def cz(self, a: int, b: int) -> None:
        idx = [slice(None)] * self.t.ndim
        idx[self.axis(a)] = 1
        idx[self.axis(b)] = 1
        self.t[tuple(idx)] *= -1

    def cx(self, c: int, t: int) -> None:
        idx = [slice(None)] * self.t.ndim
        idx[self.axis(c)] = 1
        sub = self.t[tuple(idx)]
        ta = self.axis(t)
        # removing the control axis shifts later axes down by one
        ta -= ta > self.axis(c)
        self.t[tuple(idx)] = np.flip(sub, axis=ta).copy()

    def project(self, q: int, bra: np.ndarray) -> None:
        ax = self.axis(q)
        self.t = np.tensordot(bra, self.t, axes=([0], [ax]))
        self.qubits.pop(ax)

    def amplitudes(self, order: Sequence[int]) -> np.ndarray:
        if sorted(order) != sorted(self.qubits):
            raise SimulationError("requested qubit order does not match live qubits")
        perm = [self.axis(q) for q in order] + [self.t.ndim - 1]
        return _to_little_endian(np.transpose(self.t, perm), len(order))


def _from_little_endian(mat: np.ndarray, n: int) -> np.ndarray:
    # rows are little-endian indices; axis k of the tensor is qubit k
    t = mat.reshape((2,) * n + (mat.shape[1],))
    return np.transpose(t, list(range(n - 1, -1, -1)) + [n]).copy()


def _to_little_endian(t: np.ndarray, n: int) -> np.ndarray:
    t = np.transpose(t, list(range(n - 1, -1, -1)) + [n])
    return t.reshape(2**n, -1)


def _apply_gate(reg: _Register, g: Gate) -> None:
    if g.kind == "J":
        reg.apply1(g.qubits[0], j_matrix(float(g.angle) * np.pi))
    elif g.kind in ("E", "CZ"):
        reg.cz(*g.qubits)
    elif g.kind == "CX":
        reg.cx(*g.qubits)
    elif g.kind == "Z":
        reg.apply1(g.qubits[0], _Z)
    else:
        raise SimulationError(f"cannot simulate gate kind {g.kind!r}")


def _circuit_register(c: Circuit, inputs: Sequence[int]) -> _Register:
    reg = _Register.identity(inputs)
    for w in sorted(c.wires):
        if c.initial.get(w, "input") == "plus":
            reg.add_plus(w)
        elif w not in inputs:
            raise SimulationError(f"input wire {w} missing from the input order")
    for g in c.gates:
        _apply_gate(reg, g)
    return reg


def circuit_unitary(c: Circuit, inputs: Sequence[int] | None = None) -> np.ndarray:
    """Unitary of a circuit with only input wires and no measurements."""
    if len(c.wires) > MAX_UNITARY_WIRES:
        raise SimulationError(f"at most {MAX_UNITARY_WIRES} wires supported, got {len(c.wires)}")
    if c.measured or any(c.initial.get(w, "input") != "input" for w in c.wires):
        raise SimulationError("circuit_unitary needs a circuit without ancillas or measurements")
    order = list(inputs) if inputs is not None else sorted(c.wires)
    reg = _circuit_register(c, order)
    return reg.amplitudes(sorted(c.wires))


def circuit_branch_maps(
    c: Circuit, inputs: Sequence[int] | None = None, outputs: Sequence[int] | None = None
) -> dict[tuple[int, ...], np.ndarray]:
    """Linear map from inputs to outputs for each Z-outcome string of the measured wires.

    Ancillas start in ``|+>``; the key lists outcomes for measured wires by ascending id.
    """
    ins = list(inputs) if inputs is not None else list(c.inputs())
    outs = list(outputs) if outputs is not None else list(c.outputs())
    meas = sorted(c.measured)
    if len(c.wires) > 16:
        raise SimulationError("too many wires to simulate")
    reg = _circuit_register(c, ins)
    maps = {}
    for bits in itertools.product((0, 1), repeat=len(meas)):
        r = _Register(list(reg.qubits), reg.t)
        for q, b in zip(meas, bits):
            r.project(q, np.eye(2, dtype=complex)[b])
        maps[bits] = r.amplitudes(outs)
    return maps


def _measurement_bra(theta: float, outcome: int) -> np.ndarray:
    # <+_theta| = (<0| + e^{-i theta}<1|)/sqrt2 ; outcome 1 is <-_theta|
    sign = -1 if outcome else 1
    return np.array([1, sign * np.exp(-1j * theta)], dtype=complex) / np.sqrt(2)


def _run_pattern(p: MeasurementPattern, reg: _Register, outcomes: Mapping[int, int]) -> _Register:
    s: dict[int, int] = {}

    def parity(dep) -> int:
        return sum(s[d] for d in dep) % 2

    for cmd in p.commands:
        if isinstance(cmd, N):
            reg.add_plus(cmd.qubit)
        elif isinstance(cmd, E):
            reg.cz(*cmd.qubits)
        elif isinstance(cmd, M):
            sx, tz = parity(cmd.sdep), parity(cmd.tdep)
            theta = (-1) ** sx * float(cmd.angle) * np.pi + tz * np.pi
            b = int(outcomes[cmd.qubit])
            reg.project(cmd.qubit, _measurement_bra(theta, b))
            s[cmd.qubit] = b
        elif isinstance(cmd, X):
            if parity(cmd.dep):
                reg.apply1(cmd.qubit, _X)
        elif isinstance(cmd, Z):
            if parity(cmd.dep):
                reg.apply1(cmd.qubit, _Z)
        else:
            raise SimulationError(f"cannot simulate command {cmd}")
    return reg


@dataclass
class BranchResult:
    """One branch: forced outcomes, their probability and the unnormalized residual state."""

    outcomes: dict[int, int]
    probability: float
    state: StateVector


def run_pattern_branch(p: MeasurementPattern, psi: np.ndarray, outcomes: Mapping[int, int]) -> BranchResult:
    """Run ``p`` on ``psi`` forcing each measurement to the given outcome.

    A forced outcome with zero amplitude gives probability 0, not an error.
    """
    ins = list(p.space.inputs)
    vec = np.asarray(psi, dtype=complex).reshape(2 ** len(ins), 1)
    if abs(np.vdot(vec, vec) - 1) > NORM_TOL * 2 ** len(ins):
        raise SimulationError("input state is not normalized")
    reg = _Register(ins, _from_little_endian(vec, len(ins)))
    reg = _run_pattern(p, reg, outcomes)
    outs = sorted(p.space.outputs)
    sv = StateVector(outs, reg.amplitudes(outs))
    return BranchResult(dict(outcomes), float(sv.norm2()[0]), sv)


def pattern_branch_map(
    p: MeasurementPattern,
    outcomes: Mapping[int, int],
    inputs: Sequence[int] | None = None,
    outputs: Sequence[int] | None = None,
) -> np.ndarray:
    ins = list(inputs) if inputs is not None else sorted(p.space.inputs)
    outs = list(outputs) if outputs is not None else sorted(p.space.outputs)
    reg = _run_pattern(p, _Register.identity(ins), outcomes)
    return reg.amplitudes(outs)


def pattern_branch_maps(p: MeasurementPattern, **kw) -> dict[tuple[int, ...], np.ndarray]:
    meas = sorted(m.qubit for m in p.measurements())
    if len(p.space.vertices) > 16:
        raise SimulationError("too many qubits to simulate")
    return {
        bits: pattern_branch_map(p, dict(zip(meas, bits)), **kw) for bits in itertools.product((0, 1), repeat=len(meas))
    }


def circuit_output_unitary(c: Circuit, inputs: Sequence[int] | None = None, tol: float = EQUIV_TOL) -> np.ndarray:
    """Map on the unmeasured wires of a circuit whose measured wires end in a fixed state.

    Ancillas start in ``|+>``. The measured wires must factor out as a
    state independent of the input; otherwise ``SimulationError`` is raised.
    Rows follow the output wires, columns follow ``inputs``.
    """
    ins = list(inputs) if inputs is not None else list(c.inputs())
    outs, meas = list(c.outputs()), sorted(c.measured)
    if len(c.wires) > 16:
        raise SimulationError("too many wires to simulate")
    reg = _circuit_register(c, ins)
    a = reg.amplitudes(outs + meas).reshape(2 ** len(meas), 2 ** len(outs), -1)
    # little-endian: the outputs are the low bits, so axis 1 is the output index
    mat = np.transpose(a, (1, 2, 0)).reshape(-1, 2 ** len(meas))
    u, sv, _vh = np.linalg.svd(mat, full_matrices=False)
    if len(sv) > 1 and sv[1] > tol:
        raise SimulationError(f"measured wires stay entangled with the outputs (second singular value {sv[1]:.3g})")
    return (u[:, 0] * sv[0]).reshape(2 ** len(outs), -1)


def global_phase(a: np.ndarray, b: np.ndarray) -> complex | None:
    """Phase ``z`` with ``a ~ z b``, read off the largest entry of ``b``."""
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < EQUIV_TOL:
        return None
    z = a[idx] / b[idx]
    if abs(abs(z) - 1) > EQUIV_TOL * 10:
        return None
    return z / abs(z)


def equivalent_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = EQUIV_TOL) -> bool:
    if a.shape != b.shape:
        return False
    z = global_phase(a, b)
    if z is None:
        return bool(np.allclose(a, 0, atol=tol) and np.allclose(b, 0, atol=tol))
    return float(np.max(np.abs(a - z * b))) <= tol


def _is_isometry(u: np.ndarray, tol: float) -> bool:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1])))) <= tol


def is_strongly_deterministic(p: MeasurementPattern, tol: float = EQUIV_TOL) -> bool:
    """Every branch implements the same isometry, up to phase, with equal probability."""
    maps = pattern_branch_maps(p)
    nmeas = len(next(iter(maps)))
    scale = np.sqrt(2.0**nmeas)
    ref = next(iter(maps.values())) * scale
    if not _is_isometry(ref, tol):
        return False
    return all(equivalent_up_to_phase(a * scale, ref, tol) for a in maps.values())


def pattern_unitary(p: MeasurementPattern, tol: float = EQUIV_TOL) -> np.ndarray:
    """The isometry of a strongly deterministic pattern, taken from the all-zero branch."""
    meas = sorted(m.qubit for m in p.measurements())
    a = pattern_branch_map(p, {q: 0 for q in meas}) * np.sqrt(2.0 ** len(meas))
    if not _is_isometry(a, tol):
        raise SimulationError("pattern branch is not an isometry")
    return a


def branches_match_unitary(maps: Mapping[tuple[int, ...], np.ndarray], u: np.ndarray, tol: float = EQUIV_TOL) -> bool:
    """Each branch map, scaled by ``sqrt(2^#measured)``, equals ``u`` up to a phase."""
    for bits, a in maps.items():
        if not equivalent_up_to_phase(a * np.sqrt(2.0 ** len(bits)), u, tol):
            return False
    return True
