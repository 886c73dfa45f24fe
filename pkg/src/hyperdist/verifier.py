"""Dense statevector simulation of circuits and distributed programs.

States are flat complex vectors in little-endian order: bit ``w`` of the
basis index is the value of wire ``w``. Internally the simulator keeps an
n-dimensional tensor with one axis per live qubit so that ebit halves can
be appended and measured out as the program runs.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, Gate
from .distributor import (
    CatDisentangle,
    CatEntangle,
    DistributedProgram,
    EbitCreate,
    LocalGate,
    RemoteGate,
    Teleport,
)

MAX_QUBITS = 22

_S2 = 1 / math.sqrt(2)
_FIXED = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "t": np.diag([1, np.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, np.exp(-1j * math.pi / 4)]),
}


class SimulationError(ValueError):
    pass


def one_qubit_matrix(g: Gate) -> np.ndarray:
    if g.kind == "rz":
        return np.diag([np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)])
    if g.kind == "rx":
        c, s = math.cos(g.angle / 2), math.sin(g.angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    return _FIXED[g.kind]


class Register:
    """A tensor state over a dynamic set of labelled qubits."""

    def __init__(self, tensor: np.ndarray, labels: list):
        self.tensor = tensor
        self.labels = labels

    @classmethod
    def from_vector(cls, vec: np.ndarray, num_wires: int) -> Register:
        # C-order reshape puts the highest wire on axis 0
        tensor = np.array(vec, dtype=complex).reshape((2,) * num_wires)
        return cls(tensor, [("w", w) for w in reversed(range(num_wires))])

    def axis(self, label) -> int:
        return self.labels.index(label)

    def copy(self) -> Register:
        return Register(self.tensor.copy(), list(self.labels))

    def _pairs(self, label) -> np.ndarray:
        # view with the target qubit as the middle axis; every update is in place
        if not self.tensor.flags.c_contiguous:
            self.tensor = np.ascontiguousarray(self.tensor)
        ax = self.axis(label)
        return self.tensor.reshape(1 << ax, 2, -1)

    def apply1(self, u: np.ndarray, label) -> None:
        v = self._pairs(label)
        if u[0, 1] == 0 and u[1, 0] == 0:
            if u[0, 0] != 1:
                v[:, 0] *= u[0, 0]
            if u[1, 1] != 1:
                v[:, 1] *= u[1, 1]
            return
        a, b = v[:, 0].copy(), v[:, 1]
        v[:, 0] = u[0, 0] * a + u[0, 1] * b
        v[:, 1] = u[1, 0] * a + u[1, 1] * b

    def _slice(self, fixed: dict) -> tuple:
        idx = [slice(None)] * self.tensor.ndim
        for label, bit in fixed.items():
            idx[self.axis(label)] = bit
        return tuple(idx)

    def phase_flip(self, labels: Sequence) -> None:
        """Controlled-Z over all given qubits (CZ for two, CCZ for three)."""
        self.tensor[self._slice({l: 1 for l in labels})] *= -1

    def cnot(self, control, target) -> None:
        sl = self._slice({control: 1})
        sub = self.tensor[sl]
        tax = self.axis(target) - (self.axis(control) < self.axis(target))
        self.tensor[sl] = np.flip(sub, axis=tax).copy()

    def append_bell(self, label_a, label_b) -> None:
        if self.tensor.ndim + 2 > MAX_QUBITS:
            raise SimulationError(f"more than {MAX_QUBITS} live qubits")
        bell = np.array([[_S2, 0], [0, _S2]], dtype=complex)
        self.tensor = np.multiply.outer(self.tensor, bell)
        self.labels.extend([label_a, label_b])

    def measure(self, label, outcome: int | None, rng) -> int:
        """Z-measure and drop a qubit. ``outcome=None`` samples with ``rng``."""
        v = self._pairs(label)
        halves = (v[:, 0], v[:, 1])
        probs = [float(np.vdot(h, h).real) for h in halves]
        if outcome is None:
            outcome = int(rng.random() < probs[1] / (probs[0] + probs[1]))
        if probs[outcome] < 1e-14:
            raise SimulationError(f"forced measurement outcome {outcome} has zero probability")
        shape = list(self.tensor.shape)
        ax = self.axis(label)
        del shape[ax]
        self.tensor = (halves[outcome] / math.sqrt(probs[outcome])).reshape(shape)
        del self.labels[ax]
        return outcome

    def rename(self, old, new) -> None:
        self.labels[self.axis(old)] = new

    def to_vector(self, num_wires: int) -> np.ndarray:
        order = [self.axis(("w", w)) for w in reversed(range(num_wires))]
        if len(order) != self.tensor.ndim:
            raise SimulationError("ancilla qubits still live at the end of the program")
        return np.transpose(self.tensor, order).reshape(-1).copy()

    def apply_gate(self, g: Gate, refs: Sequence) -> None:
        if len(refs) == 1:
            self.apply1(one_qubit_matrix(g), refs[0])
        elif g.kind in ("cz", "ccz"):
            self.phase_flip(refs)
        elif g.kind == "cx":
            self.cnot(*refs)
        else:
            raise SimulationError(f"cannot simulate {g.kind} directly")


def basis_state(num_wires: int, index: int = 0) -> np.ndarray:
    v = np.zeros(2**num_wires, dtype=complex)
    v[index] = 1
    return v


def random_state(num_wires: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2**num_wires) + 1j * rng.normal(size=2**num_wires)
    return v / np.linalg.norm(v)


def _input(num_wires: int, input_state) -> np.ndarray:
    if num_wires > MAX_QUBITS:
        raise SimulationError(f"{num_wires} wires exceeds the {MAX_QUBITS}-qubit guard")
    if input_state is None:
        return basis_state(num_wires)
    if isinstance(input_state, (int, np.integer)):
        return basis_state(num_wires, int(input_state))
    vec = np.asarray(input_state, dtype=complex)
    if vec.shape != (2**num_wires,):
        raise SimulationError(f"input state has shape {vec.shape}, expected {(2**num_wires,)}")
    return vec


def _expand(g: Gate) -> list[Gate]:
    # swap/ccx are simulated through their textbook identities
    if g.kind == "swap":
        a, b = g.wires
        return [Gate("cx", (a, b)), Gate("cx", (b, a)), Gate("cx", (a, b))]
    if g.kind == "ccx":
        a, b, t = g.wires
        return [Gate("h", (t,)), Gate("ccz", (a, b, t)), Gate("h", (t,))]
    return [g]


def simulate_circuit(c: Circuit, input_state=None) -> np.ndarray:
    reg = Register.from_vector(_input(c.num_wires, input_state), c.num_wires)
    for g in c.gates:
        for sub in _expand(g):
            reg.apply_gate(sub, [("w", w) for w in sub.wires])
    return reg.to_vector(c.num_wires)


def count_measurements(dp: DistributedProgram) -> int:
    n = 0
    for op in dp.ops:
        if isinstance(op, (CatEntangle, CatDisentangle)):
            n += 1
        elif isinstance(op, Teleport):
            n += 2
    return n


def _compile(dp: DistributedProgram) -> list[tuple]:
    """Lower a program to register steps; ``("m", label, fixes)`` applies ``fixes`` on outcome 1."""
    steps: list[tuple] = []

    def gate_step(g, refs):
        if len(refs) == 1:
            steps.append(("u", one_qubit_matrix(g), refs[0]))
        else:
            steps.append(("g", g, refs))

    homes = {}
    for op in dp.ops:
        if isinstance(op, LocalGate):
            gate_step(op.gate, [("w", w) for w in op.gate.wires])
        elif isinstance(op, RemoteGate):
            gate_step(op.gate, [("r", op.halves[w]) if w in op.halves else ("w", w) for w in op.gate.wires])
        elif isinstance(op, EbitCreate):
            steps.append(("bell", ("l", op.ebit), ("r", op.ebit)))
        elif isinstance(op, CatEntangle):
            homes[op.ebit] = op.home_wire
            steps.append(("cx", ("w", op.home_wire), ("l", op.ebit)))
            steps.append(("m", ("l", op.ebit), ((_FIXED["x"], ("r", op.ebit)),)))
        elif isinstance(op, CatDisentangle):
            if op.ebit not in homes:
                raise SimulationError(f"ebit {op.ebit} disentangled before it was entangled")
            steps.append(("u", _FIXED["h"], ("r", op.ebit)))
            steps.append(("m", ("r", op.ebit), ((_FIXED["z"], ("w", homes.pop(op.ebit))),)))
        elif isinstance(op, Teleport):
            src, pair = ("w", op.wire), (("tp", op.wire), ("tq", op.wire))
            steps.append(("bell", *pair))
            steps.append(("cx", src, pair[0]))
            steps.append(("u", _FIXED["h"], src))
            # X and Z corrections commute up to a global phase, so each can follow its own outcome
            steps.append(("m", src, ((_FIXED["z"], pair[1]),)))
            steps.append(("m", pair[0], ((_FIXED["x"], pair[1]),)))
            steps.append(("mv", pair[1], src))
        else:
            raise SimulationError(f"unknown op {op!r}")
    return steps


def _run(reg: Register, steps, start: int):
    """Execute ``steps[start:]`` up to the next measurement; return its index or None when done."""
    for i in range(start, len(steps)):
        step = steps[i]
        kind = step[0]
        if kind == "u":
            reg.apply1(step[1], step[2])
        elif kind == "g":
            reg.apply_gate(step[1], step[2])
        elif kind == "cx":
            reg.cnot(step[1], step[2])
        elif kind == "bell":
            reg.append_bell(step[1], step[2])
        elif kind == "mv":
            reg.rename(step[1], step[2])
        else:
            return i
    return None


def _measure_step(reg: Register, step, outcome, rng) -> int:
    bit = reg.measure(step[1], outcome, rng)
    if bit:
        for u, label in step[2]:
            reg.apply1(u, label)
    return bit


def simulate_distributed(dp: DistributedProgram, input_state=None, branch=None) -> np.ndarray:
    """Run a distributed program and return the final state of the circuit wires.

    ``branch`` is either a sequence of measurement outcomes consumed in
    program order (its length must equal :func:`count_measurements`), or an
    integer seed / numpy Generator for sampled outcomes. ``None`` samples
    with seed 0.
    """
    steps = _compile(dp)
    reg = Register.from_vector(_input(dp.num_wires, input_state), dp.num_wires)
    if branch is None or isinstance(branch, (int, np.integer)):
        rng, bits = np.random.default_rng(branch or 0), None
    elif isinstance(branch, np.random.Generator):
        rng, bits = branch, None
    else:
        rng, bits = None, list(branch)
        if len(bits) != count_measurements(dp):
            raise SimulationError(
                f"branch has {len(bits)} outcomes, program makes {count_measurements(dp)} measurements"
            )
    cursor = iter(bits) if bits is not None else None
    i = _run(reg, steps, 0)
    while i is not None:
        _measure_step(reg, steps[i], next(cursor) if cursor is not None else None, rng)
        i = _run(reg, steps, i + 1)
    return reg.to_vector(dp.num_wires)


def all_branches(dp: DistributedProgram, input_state=None) -> Iterable[tuple[tuple, np.ndarray]]:
    """Yield ``(outcomes, final state)`` for every measurement branch, in lexicographic order.

    Equivalent to calling :func:`simulate_distributed` once per outcome
    string, but each shared prefix of the branch tree is simulated once.
    """
    steps = _compile(dp)
    reg = Register.from_vector(_input(dp.num_wires, input_state), dp.num_wires)
    stack = [(reg, _run(reg, steps, 0), ())]
    while stack:
        reg, i, prefix = stack.pop()
        if i is None:
            yield prefix, reg.to_vector(dp.num_wires)
            continue
        # push outcome 1 first so outcome 0 is explored first
        for bit in (1, 0):
            child = reg.copy() if bit else reg
            _measure_step(child, steps[i], bit, None)
            stack.append((child, _run(child, steps, i + 1), prefix + (bit,)))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise SimulationError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def assert_equiv(a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> bool:
    """True iff the states agree up to global phase: |<a|b>| >= 1 - tol."""
    if a.shape != b.shape:
        raise SimulationError(f"dimension mismatch {a.shape} vs {b.shape}")
    return bool(abs(np.vdot(a, b)) >= 1 - tol)


def branches(dp: DistributedProgram, max_exhaustive: int = 12, samples: int = 32, seed: int = 0) -> Iterable[tuple]:
    """All outcome strings when there are few measurements, otherwise seeded samples."""
    m = count_measurements(dp)
    if m <= max_exhaustive:
        yield from itertools.product((0, 1), repeat=m)
        return
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        yield tuple(int(b) for b in rng.integers(0, 2, size=m))


def check_program_equivalence(dp: DistributedProgram, c: Circuit, input_state=None, tol: float = 1e-8, **kw) -> bool:
    """Every branch of ``dp`` reproduces ``c`` on ``input_state`` up to global phase."""
    expected = simulate_circuit(c, input_state)
    if count_measurements(dp) <= kw.get("max_exhaustive", 12):
        return all(assert_equiv(out, expected, tol) for _, out in all_branches(dp, input_state))
    return all(
        assert_equiv(simulate_distributed(dp, input_state, b), expected, tol) for b in branches(dp, **kw)
    )


def dump_amplitudes(vec: np.ndarray) -> str:
    return "\n".join(f"{i} {float(a.real)!r} {float(a.imag)!r}" for i, a in enumerate(vec))
