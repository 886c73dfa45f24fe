"""Circuit IR, the DQC v1 text format, gateset rewriting and benchmark generators.

A circuit is an ordered list of gates over 0-based wire indices. Every
transformation here returns a new :class:`Circuit`; nothing is mutated.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

ONE_QUBIT = frozenset({"h", "x", "y", "z", "s", "sdg", "t", "tdg", "rz", "rx"})
DIAGONAL = frozenset({"z", "s", "sdg", "t", "tdg", "rz"})
PAULI = frozenset({"x", "y", "z"})
ROTATIONS = frozenset({"rz", "rx"})
ARITY = {**{k: 1 for k in ONE_QUBIT}, "cz": 2, "cx": 2, "swap": 2, "ccz": 3, "ccx": 3}
# gates that become hypergraph vertices
ENTANGLING = frozenset({"cz", "ccz"})

# inverse of each diagonal gate under conjugation by X
_X_CONJUGATE = {"s": "sdg", "sdg": "s", "t": "tdg", "tdg": "t"}


class CircuitError(ValueError):
    """Raised for malformed circuits or DQC text."""


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if len(self.wires) != ARITY[self.kind]:
            raise CircuitError(f"{self.kind} takes {ARITY[self.kind]} wire(s), got {len(self.wires)}")
        if len(set(self.wires)) != len(self.wires):
            raise CircuitError(f"duplicate wire in {self.kind} {self.wires}")
        if any(w < 0 for w in self.wires):
            raise CircuitError(f"negative wire index in {self.kind} {self.wires}")
        if self.kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{self.kind} needs a finite angle")
        elif self.angle is not None:
            raise CircuitError(f"{self.kind} takes no angle")

    @property
    def is_entangling(self) -> bool:
        return self.kind in ENTANGLING

    @property
    def is_diagonal(self) -> bool:
        return self.kind in DIAGONAL or self.kind in ENTANGLING

    def on(self, *wires: int) -> Gate:
        return Gate(self.kind, tuple(wires), self.angle)

    def __str__(self):
        ws = " ".join(str(w) for w in self.wires)
        if self.angle is not None:
            return f"{self.kind} {self.angle!r} {ws}"
        return f"{self.kind} {ws}"


def gate(kind: str, *wires: int, angle: float | None = None) -> Gate:
    return Gate(kind, tuple(wires), angle)


@dataclass(frozen=True)
class Circuit:
    num_wires: int
    gates: tuple[Gate, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.num_wires < 0:
            raise CircuitError("negative wire count")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for w in g.wires:
                if w >= self.num_wires:
                    raise CircuitError(f"wire {w} out of range in {g} (circuit has {self.num_wires})")

    def __len__(self):
        return len(self.gates)

    def count(self, *kinds: str) -> int:
        return sum(1 for g in self.gates if g.kind in kinds)

    @property
    def num_entangling(self) -> int:
        return sum(1 for g in self.gates if g.kind in ENTANGLING)

    def with_gates(self, gates) -> Circuit:
        return Circuit(self.num_wires, tuple(gates), self.name)


# -- DQC v1 text format -------------------------------------------------------


def parse_circuit(text: str, name: str = "") -> Circuit:
    """Parse DQC v1 text. Errors carry the 1-based line number."""
    num_wires = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].lower()
        try:
            if num_wires is None:
                if head != "qubits" or len(tokens) != 2:
                    raise CircuitError("expected 'qubits N' header")
                num_wires = int(tokens[1])
                if num_wires < 0:
                    raise CircuitError("qubit count must be non-negative")
                continue
            if head not in ARITY:
                raise CircuitError(f"unknown gate {tokens[0]!r}")
            args = tokens[1:]
            angle = None
            if head in ROTATIONS:
                if not args:
                    raise CircuitError(f"{head} needs an angle")
                angle = float(args[0])
                args = args[1:]
            if len(args) != ARITY[head]:
                raise CircuitError(f"{head} takes {ARITY[head]} wire(s), got {len(args)}")
            wires = tuple(int(a) for a in args)
            for w in wires:
                if not 0 <= w < num_wires:
                    raise CircuitError(f"wire {w} out of range (qubits {num_wires})")
            gates.append(Gate(head, wires, angle))
        except (CircuitError, ValueError) as exc:
            raise CircuitError(f"line {lineno}: {exc}") from None
    if num_wires is None:
        raise CircuitError("line 1: missing 'qubits N' header")
    return Circuit(num_wires, tuple(gates), name)


def serialize_circuit(c: Circuit) -> str:
    return "\n".join([f"qubits {c.num_wires}", *(str(g) for g in c.gates)])


# -- gateset rewriting --------------------------------------------------------


def _cx(c: int, t: int) -> list[Gate]:
    return [gate("h", t), gate("cz", c, t), gate("h", t)]


def ccz_decomposition(a: int, b: int, c: int) -> list[Gate]:
    """CCZ as 6 CNOTs and T/Tdg phases, CNOTs already rewritten to H-CZ-H."""
    seq = [
        ("cx", b, c), ("tdg", c), ("cx", a, c), ("t", c), ("cx", b, c), ("tdg", c),
        ("cx", a, c), ("t", b), ("t", c), ("cx", a, b), ("t", a), ("tdg", b), ("cx", a, b),
    ]
    out = []
    for kind, *ws in seq:
        out.extend(_cx(*ws) if kind == "cx" else [gate(kind, *ws)])
    return out


def rewrite_to_cz_gateset(c: Circuit, ccz_native: bool = False) -> Circuit:
    out: list[Gate] = []
    for g in c.gates:
        k, ws = g.kind, g.wires
        if k == "cx":
            out.extend(_cx(*ws))
        elif k == "swap":
            a, b = ws
            out.extend(_cx(a, b) + _cx(b, a) + _cx(a, b))
        elif k in ("ccz", "ccx"):
            a, b, t = ws
            core = [gate("ccz", a, b, t)] if ccz_native else ccz_decomposition(a, b, t)
            out.extend([gate("h", t), *core, gate("h", t)] if k == "ccx" else core)
        else:
            out.append(g)
    return c.with_gates(out)


def pull_czs_early(c: Circuit) -> Circuit:
    """Move CZ/CCZ gates as early as the commutation rules allow.

    Two passes. First, every Pauli (original X/Y/Z and the Z byproducts of
    pushing X or Y through a CZ) is carried in a per-wire Pauli frame to the
    end of the circuit, conjugating the gates it passes. This removes X and
    Y from between CZs and leaves at most one X and one Z per wire at the
    end. Pushing X through a CCZ emits byproduct CZs right after it.

    Second, each diagonal one-qubit gate is delayed past the CZ/CCZ gates on
    its wire until the next non-diagonal gate (H or Rx) on that wire. This is
    the fixpoint of bubbling CZs leftwards, reached in one pass.

    The result equals the input up to a global phase.
    """
    if any(g.kind not in ONE_QUBIT and g.kind not in ENTANGLING for g in c.gates):
        raise CircuitError("pull_czs_early expects a CZ-gateset circuit")
    fx = [0] * c.num_wires
    fz = [0] * c.num_wires
    body: list[Gate] = []
    for g in c.gates:
        k = g.kind
        if k in PAULI:
            (w,) = g.wires
            fx[w] ^= k in ("x", "y")
            fz[w] ^= k in ("z", "y")
        elif k == "h":
            (w,) = g.wires
            fx[w], fz[w] = fz[w], fx[w]
            body.append(g)
        elif k in DIAGONAL:
            (w,) = g.wires
            if fx[w]:
                g = Gate(_X_CONJUGATE[k], g.wires) if k in _X_CONJUGATE else Gate("rz", g.wires, -g.angle)
            body.append(g)
        elif k == "rx":
            (w,) = g.wires
            body.append(Gate("rx", g.wires, -g.angle) if fz[w] else g)
        elif k == "cz":
            a, b = g.wires
            body.append(g)
            fz[b] ^= fx[a]
            fz[a] ^= fx[b]
        else:  # ccz: conjugating by X on a subset S of its wires
            body.append(g)
            ws = g.wires
            flipped = [fx[w] for w in ws]
            for i in range(3):
                j, l = [x for x in range(3) if x != i]
                if flipped[i]:
                    body.append(gate("cz", ws[j], ws[l]))
                if flipped[j] and flipped[l]:
                    fz[ws[i]] ^= 1
    # delay diagonal one-qubit gates to just before the next blocking gate
    pending: dict[int, list[Gate]] = {}
    out: list[Gate] = []
    for g in body:
        if len(g.wires) == 1:
            (w,) = g.wires
            if g.kind in DIAGONAL:
                pending.setdefault(w, []).append(g)
                continue
            out.extend(pending.pop(w, ()))
        out.append(g)
    for w in sorted(pending):
        out.extend(pending[w])
    for w in range(c.num_wires):
        if fx[w]:
            out.append(gate("x", w))
        if fz[w]:
            out.append(gate("z", w))
    return c.with_gates(out)


# -- generators ---------------------------------------------------------------


def controlled_phase(control: int, target: int, theta: float) -> list[Gate]:
    """CP(theta) as Rz(theta/2) on both wires around two CX, in the CZ gateset."""
    return [
        gate("rz", control, angle=theta / 2),
        *_cx(control, target),
        gate("rz", target, angle=-theta / 2),
        *_cx(control, target),
        gate("rz", target, angle=theta / 2),
    ]


def gen_qft(n: int, swaps: bool = False) -> Circuit:
    if n < 1:
        raise CircuitError("QFT needs at least one qubit")
    gates: list[Gate] = []
    for i in range(n):
        gates.append(gate("h", i))
        for j in range(i + 1, n):
            gates.extend(controlled_phase(j, i, math.pi / 2 ** (j - i)))
    if swaps:
        for i in range(n // 2):
            a, b = i, n - 1 - i
            gates.extend(_cx(a, b) + _cx(b, a) + _cx(a, b))
    return Circuit(n, tuple(gates), f"qft{n}")


def gen_random(n: int, g: int, ccz_fraction: float = 0.0, seed: int = 0) -> Circuit:
    """Random circuit over {H, T, CZ, CCZ}.

    Each gate is a CCZ with probability ``ccz_fraction`` and otherwise one of
    H, T, CZ with equal probability, on distinct uniformly drawn wires.
    """
    if n < 2:
        raise CircuitError("need at least 2 wires")
    if g < 0:
        raise CircuitError("gate count must be non-negative")
    if not 0.0 <= ccz_fraction <= 1.0:
        raise CircuitError("ccz_fraction must lie in [0, 1]")
    if ccz_fraction > 0 and n < 3:
        raise CircuitError("CCZ gates need at least 3 wires")
    rng = random.Random(seed)
    gates = []
    for _ in range(g):
        if rng.random() < ccz_fraction:
            gates.append(Gate("ccz", tuple(rng.sample(range(n), 3))))
            continue
        kind = rng.choice(("h", "t", "cz"))
        arity = 2 if kind == "cz" else 1
        gates.append(Gate(kind, tuple(rng.sample(range(n), arity))))
    return Circuit(n, tuple(gates), f"random{n}x{g}s{seed}")


def gen_random_cz(n: int, num_entangling: int, ccz_fraction: float = 0.0, seed: int = 0) -> Circuit:
    """Like :func:`gen_random`, stopping right after ``num_entangling`` CZ/CCZ gates."""
    if num_entangling < 0:
        raise CircuitError("gate count must be non-negative")
    budget = 4 * num_entangling + 16
    while True:
        c = gen_random(n, budget, ccz_fraction, seed)
        seen = 0
        for pos, g in enumerate(c.gates):
            seen += g.kind in ENTANGLING
            if seen == num_entangling:
                return Circuit(n, c.gates[: pos + 1], f"random{n}cz{num_entangling}s{seed}")
        if num_entangling == 0:
            return Circuit(n, (), f"random{n}cz0s{seed}")
        budget *= 2


def fig1_circuit() -> Circuit:
    """The four-wire, five-CZ example circuit used throughout the docs and tests.

    Wires A..D are 0..3; the CZs in order are alpha (A,C), beta (B,C),
    gamma (C,D), delta (B,C) and eta (B,D).
    """
    return parse_circuit(
        "qubits 4\n"
        "cz 0 2\ncz 1 2\n"
        "h 1\nh 2\n"
        "cz 2 3\n"
        "h 2\nh 3\n"
        "cz 1 2\ncz 1 3\n",
        name="fig1",
    )
