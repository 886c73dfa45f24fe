"""Build distributed programs from a circuit and a partition of its hypergraph.

Each cut of a hyperedge becomes one ebit: a cat-entangler shares the home
wire's computational-basis state with the foreign QPU right before the
hyperedge's first gate there, the gates run against the remote half, and a
cat-disentangler retires the ebit right after the last of them.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field

from .circuit import ENTANGLING, Circuit, Gate, parse_circuit
from .hypergraph import Hypergraph, HypergraphError, Partition, build_hypergraph
from .partitioner import PartitionerConfig, partition_multilevel


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class EbitCreate:
    ebit: int
    qpu_a: int
    qpu_b: int


@dataclass(frozen=True)
class CatEntangle:
    ebit: int
    home_wire: int


@dataclass(frozen=True)
class RemoteGate:
    """A CZ/CCZ executed on a QPU that reaches some operands through ebit halves.

    ``halves`` maps each remotely accessed wire to the ebit carrying it.
    """

    gate: Gate
    qpu: int
    halves: dict = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "halves", dict(sorted(self.halves.items())))


@dataclass(frozen=True)
class LocalGate:
    gate: Gate
    qpu: int


@dataclass(frozen=True)
class CatDisentangle:
    ebit: int


@dataclass(frozen=True)
class Teleport:
    wire: int
    qpu_from: int
    qpu_to: int


@dataclass(frozen=True)
class DistributedProgram:
    k: int
    num_wires: int
    wire_alloc: tuple[int, ...]
    ops: tuple
    ebit_count: int
    ebit_peak: int

    @property
    def num_teleports(self) -> int:
        return sum(isinstance(op, Teleport) for op in self.ops)


def ebit_liveness(ops) -> int:
    """Peak number of simultaneously stored ebit halves over the op stream."""
    live = peak = 0
    for op in ops:
        if isinstance(op, EbitCreate):
            live += 2
        elif isinstance(op, (CatEntangle, CatDisentangle)):
            live -= 1
        elif isinstance(op, Teleport):
            peak = max(peak, live + 2)
            continue
        peak = max(peak, live)
    return peak


def _program(k, num_wires, alloc, ops) -> DistributedProgram:
    ops = tuple(ops)
    ebits = sum(isinstance(op, (EbitCreate, Teleport)) for op in ops)
    return DistributedProgram(k, num_wires, tuple(alloc), ops, ebits, ebit_liveness(ops))


def _schedule(c: Circuit, gate_links, members, link_last) -> list[int]:
    """Topological order of the gates (per-wire order kept) that keeps few links open.

    Once a link opens, its last gate and every gate it depends on become
    urgent and run as soon as they are ready. Otherwise gates that open a
    multi-gate link wait until nothing else is ready. Ties go to the
    earlier source position.
    """
    per_wire = [[] for _ in range(c.num_wires)]
    for pos, g in enumerate(c.gates):
        for w in g.wires:
            per_wire[w].append(pos)
    head = [0] * c.num_wires
    remaining = dict(members)
    opened = set()
    urgent = bytearray(len(c.gates))
    # urgent gates not yet executed, per wire; everything ahead of them on the wire is urgent too
    pending = [0] * c.num_wires
    version = [0] * len(c.gates)
    heap: list = []

    def front(w):
        return per_wire[w][head[w]] if head[w] < len(per_wire[w]) else None

    def ready(pos):
        return all(front(w) == pos for w in c.gates[pos].wires)

    def push(pos):
        if urgent[pos]:
            cls = 0
        elif any(key not in opened and remaining[key] > 1 for key in gate_links[pos]):
            cls = 2
        else:
            cls = 1
        version[pos] += 1
        heapq.heappush(heap, (cls, pos, version[pos]))

    def mark(pos):
        stack = [pos]
        while stack:
            x = stack.pop()
            if urgent[x]:
                continue
            urgent[x] = 1
            is_ready = True
            for w in c.gates[x].wires:
                pending[w] += 1
                f = front(w)
                if f != x:
                    is_ready = False
                    stack.append(f)
            if is_ready:
                push(x)

    for pos in range(len(c.gates)):
        if ready(pos):
            push(pos)
    order = []
    while heap:
        _, pos, ver = heapq.heappop(heap)
        if ver != version[pos]:
            continue
        order.append(pos)
        fresh = []
        for key in gate_links[pos]:
            if key not in opened:
                opened.add(key)
                if remaining[key] > 1:
                    fresh.append(key)
            remaining[key] -= 1
        wires = c.gates[pos].wires
        for w in wires:
            head[w] += 1
            pending[w] -= urgent[pos]
        for w in wires:
            f = front(w)
            if f is not None and pending[w] > 0:
                mark(f)
        for key in fresh:
            mark(link_last[key])
        for w in wires:
            f = front(w)
            if f is not None and ready(f):
                push(f)
    if len(order) != len(c.gates):
        raise ProgramError("gate scheduling stalled")
    return order


def distribute(c: Circuit, h: Hypergraph, p: Partition, schedule: str = "greedy") -> DistributedProgram:
    """Distributed program realising ``c`` under partition ``p`` of ``h = build_hypergraph(c)``.

    The number of ebits equals ``cut_count(h, p)``: one per (hyperedge,
    foreign block) pair, called a link below. Each link's ebit is created
    right before its first gate and retired right after its last one.

    ``schedule="source"`` executes gates in circuit order. ``"greedy"``
    reorders gates on disjoint wires (per-wire order is kept, so the
    unitary is unchanged) to shorten how long links stay open; see
    :func:`_schedule`.
    """
    if schedule not in ("greedy", "source"):
        raise ValueError(f"unknown schedule {schedule!r}")
    n = c.num_wires
    if h.num_wire_vertices != n or len(p.labels) != h.num_vertices:
        raise HypergraphError("partition does not match the hypergraph of this circuit")
    labels = p.labels
    gate_vertex_at = {}
    for i, gv in enumerate(h.gate_vertices):
        g = c.gates[gv.position] if 0 <= gv.position < len(c.gates) else None
        if g is None or g.wires != gv.wires or g.kind not in ENTANGLING:
            raise HypergraphError(f"gate-vertex {n + i} does not match circuit position {gv.position}")
        gate_vertex_at[gv.position] = n + i
    if len(gate_vertex_at) != c.num_entangling:
        raise HypergraphError("hypergraph does not cover every CZ/CCZ of the circuit")

    hedge_of = h.hedge_of()
    gate_links: list[list[tuple[int, int]]] = [[] for _ in c.gates]
    members: Counter = Counter()
    link_last: dict[tuple[int, int], int] = {}
    for pos, v in sorted(gate_vertex_at.items()):
        qpu = labels[v]
        for w in c.gates[pos].wires:
            if labels[w] != qpu:
                key = (hedge_of[v, w], qpu)
                gate_links[pos].append(key)
                members[key] += 1
                link_last[key] = pos
    order = range(len(c.gates)) if schedule == "source" else _schedule(c, gate_links, members, link_last)

    ops = []
    ebit_of: dict[tuple[int, int], int] = {}
    remaining = dict(members)
    for pos in order:
        g = c.gates[pos]
        for key in gate_links[pos]:
            if key not in ebit_of:
                eid = len(ebit_of)
                ebit_of[key] = eid
                home_wire = h.hyperedges[key[0]][0]
                ops.append(EbitCreate(eid, labels[home_wire], key[1]))
                ops.append(CatEntangle(eid, home_wire))
        if pos in gate_vertex_at:
            qpu = labels[gate_vertex_at[pos]]
            halves = {h.hyperedges[key[0]][0]: ebit_of[key] for key in gate_links[pos]}
            ops.append(RemoteGate(g, qpu, halves) if halves else LocalGate(g, qpu))
        else:
            ops.append(LocalGate(g, labels[g.wires[0]]))
        for key in gate_links[pos]:
            remaining[key] -= 1
            if remaining[key] == 0:
                ops.append(CatDisentangle(ebit_of[key]))
    return _program(p.k, n, labels[:n], ops)


def concatenate(parts, k: int, num_wires: int) -> DistributedProgram:
    """Chain per-segment programs, teleporting wires whose QPU changes in between."""
    ops = []
    offset = 0
    alloc = list(parts[0].wire_alloc)
    current = list(alloc)
    for part in parts:
        for w, q in enumerate(part.wire_alloc):
            if current[w] != q:
                ops.append(Teleport(w, current[w], q))
                current[w] = q
        created = 0
        for op in part.ops:
            if isinstance(op, EbitCreate):
                ops.append(EbitCreate(op.ebit + offset, op.qpu_a, op.qpu_b))
                created += 1
            elif isinstance(op, CatEntangle):
                ops.append(CatEntangle(op.ebit + offset, op.home_wire))
            elif isinstance(op, CatDisentangle):
                ops.append(CatDisentangle(op.ebit + offset))
            elif isinstance(op, RemoteGate):
                ops.append(RemoteGate(op.gate, op.qpu, {w: e + offset for w, e in op.halves.items()}))
            else:
                ops.append(op)
        offset += created
    return _program(k, num_wires, alloc, ops)


def check_program(dp: DistributedProgram, c: Circuit | None = None) -> None:
    """Validate ebit bookkeeping, operand co-location and, given ``c``, gate order."""
    loc = list(dp.wire_alloc)
    ebits: dict[int, dict] = {}
    live = peak = 0
    executed = []
    for i, op in enumerate(dp.ops):
        where = f"op {i} ({op})"
        if isinstance(op, EbitCreate):
            if op.ebit in ebits:
                raise ProgramError(f"{where}: ebit created twice")
            ebits[op.ebit] = {"a": op.qpu_a, "b": op.qpu_b, "state": "created", "home": None}
            live += 2
        elif isinstance(op, CatEntangle):
            eb = ebits.get(op.ebit)
            if eb is None or eb["state"] != "created":
                raise ProgramError(f"{where}: entangling an ebit that is not freshly created")
            if loc[op.home_wire] != eb["a"]:
                raise ProgramError(f"{where}: home wire is not on the ebit's local QPU")
            eb.update(state="shared", home=op.home_wire)
            live -= 1
        elif isinstance(op, CatDisentangle):
            eb = ebits.get(op.ebit)
            if eb is None or eb["state"] != "shared":
                raise ProgramError(f"{where}: disentangling an ebit that is not shared")
            eb["state"] = "done"
            live -= 1
        elif isinstance(op, RemoteGate):
            for w in op.gate.wires:
                if w in op.halves:
                    eb = ebits.get(op.halves[w])
                    if eb is None or eb["state"] != "shared" or eb["home"] != w or eb["b"] != op.qpu:
                        raise ProgramError(f"{where}: wire {w} is not available on QPU {op.qpu}")
                elif loc[w] != op.qpu:
                    raise ProgramError(f"{where}: wire {w} is on QPU {loc[w]}, not {op.qpu}")
            executed.append(op.gate)
        elif isinstance(op, LocalGate):
            if any(loc[w] != op.qpu for w in op.gate.wires):
                raise ProgramError(f"{where}: operands are not all on QPU {op.qpu}")
            executed.append(op.gate)
        elif isinstance(op, Teleport):
            if loc[op.wire] != op.qpu_from or op.qpu_from == op.qpu_to:
                raise ProgramError(f"{where}: bad teleport source")
            loc[op.wire] = op.qpu_to
            peak = max(peak, live + 2)
        else:
            raise ProgramError(f"{where}: unknown op")
        peak = max(peak, live)
    open_ = [e for e, eb in ebits.items() if eb["state"] != "done"]
    if open_:
        raise ProgramError(f"ebits {open_} are never disentangled")
    if peak != dp.ebit_peak:
        raise ProgramError(f"stored ebit_peak {dp.ebit_peak} differs from replay {peak}")
    if len(ebits) + dp.num_teleports != dp.ebit_count:
        raise ProgramError("ebit_count does not match the op stream")
    if c is not None:
        for w in range(c.num_wires):
            want = [g for g in c.gates if w in g.wires]
            got = [g for g in executed if w in g.wires]
            if want != got:
                raise ProgramError(f"gate order on wire {w} differs from the source circuit")


def ebit_stats(dp: DistributedProgram, c: Circuit) -> dict:
    entangling = c.num_entangling
    per_qpu = Counter(dp.wire_alloc)
    return {
        "ebit_count": dp.ebit_count,
        "ebits_per_cz": dp.ebit_count / entangling if entangling else 0.0,
        "ebit_peak": dp.ebit_peak,
        "overhead": dp.ebit_peak / c.num_wires if c.num_wires else 0.0,
        "teleports": dp.num_teleports,
        "per_qpu_wires": [per_qpu.get(q, 0) for q in range(dp.k)],
    }


def wire_graph(c: Circuit) -> Hypergraph:
    """Wires as vertices, one 2-pin edge per wire pair of every CZ/CCZ."""
    edges = []
    for g in c.gates:
        if g.kind in ENTANGLING:
            ws = g.wires
            edges += [(ws[i], ws[j]) for i in range(len(ws)) for j in range(i + 1, len(ws))]
    return Hypergraph(c.num_wires, (), tuple(edges))


def per_gate_labels(c: Circuit, h: Hypergraph, wire_labels) -> list[int]:
    """Extend a wire labelling so each gate runs where most of its wires are (lowest wire on ties)."""
    labels = list(wire_labels[: c.num_wires])
    for gv in h.gate_vertices:
        blocks = [labels[w] for w in gv.wires]
        counts = Counter(blocks)
        labels.append(max(blocks, key=lambda b: (counts[b], -blocks.index(b))))
    return labels


def graph_baseline_distribute(c: Circuit, k: int, epsilon: float = 0.03, seed: int = 0, **cfg) -> DistributedProgram:
    """Standard-graph baseline: partition the wire graph, pay one ebit per remote wire of every gate.

    Realised as :func:`distribute` over a hypergraph with one hyperedge per
    gate occurrence (window 0), so no ebit is ever shared between gates.
    """
    g = wire_graph(c)
    p = partition_multilevel(g, PartitionerConfig(k=k, epsilon=epsilon, seed=seed, **cfg))
    h = build_hypergraph(c, window=0)
    labels = per_gate_labels(c, h, p.labels)
    return distribute(c, h, Partition.of(h, labels, k, epsilon))


# -- dqc-dist v1 text format --------------------------------------------------


def _operand(w, halves):
    return f"e{halves[w]}" if w in halves else str(w)


def write_program(dp: DistributedProgram) -> str:
    lines = ["dqc-dist v1", f"qubits {dp.num_wires}", f"qpus {dp.k}"]
    lines += [f"alloc {w} {q}" for w, q in enumerate(dp.wire_alloc)]
    lines.append("begin")
    for op in dp.ops:
        if isinstance(op, EbitCreate):
            lines.append(f"ebit {op.ebit} {op.qpu_a} {op.qpu_b}")
        elif isinstance(op, CatEntangle):
            lines.append(f"entangle {op.ebit} {op.home_wire}")
        elif isinstance(op, RemoteGate):
            name = "rcz" if op.gate.kind == "cz" else "rccz"
            args = " ".join(_operand(w, op.halves) for w in op.gate.wires)
            lines.append(f"{name} @{op.qpu} {args}")
        elif isinstance(op, LocalGate):
            lines.append(f"g @{op.qpu} {op.gate}")
        elif isinstance(op, CatDisentangle):
            lines.append(f"disentangle {op.ebit}")
        elif isinstance(op, Teleport):
            lines.append(f"teleport {op.wire} {op.qpu_from} {op.qpu_to}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def read_program(text: str) -> DistributedProgram:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "dqc-dist v1":
        raise ProgramError("missing 'dqc-dist v1' header")
    num_wires = k = None
    alloc: dict[int, int] = {}
    ops = []
    body = False
    for lineno, ln in enumerate(lines[1:], start=2):
        t = ln.split()
        try:
            if not body:
                if t[0] == "qubits":
                    num_wires = int(t[1])
                elif t[0] == "qpus":
                    k = int(t[1])
                elif t[0] == "alloc":
                    alloc[int(t[1])] = int(t[2])
                elif t[0] == "begin":
                    body = True
                else:
                    raise ProgramError(f"unexpected {t[0]!r} before 'begin'")
                continue
            if t[0] == "end":
                break
            if t[0] == "ebit":
                ops.append(EbitCreate(int(t[1]), int(t[2]), int(t[3])))
            elif t[0] == "entangle":
                ops.append(CatEntangle(int(t[1]), int(t[2])))
            elif t[0] == "disentangle":
                ops.append(CatDisentangle(int(t[1])))
            elif t[0] == "teleport":
                ops.append(Teleport(int(t[1]), int(t[2]), int(t[3])))
            elif t[0] == "g":
                g = parse_circuit(f"qubits {num_wires}\n" + " ".join(t[2:])).gates[0]
                ops.append(LocalGate(g, int(t[1].lstrip("@"))))
            elif t[0] in ("rcz", "rccz"):
                wires, halves = [], {}
                ebit_refs = []
                for tok in t[2:]:
                    if tok.startswith("e"):
                        ebit_refs.append((len(wires), int(tok[1:])))
                        wires.append(None)
                    else:
                        wires.append(int(tok))
                ops.append(("remote", t[0], int(t[1].lstrip("@")), wires, ebit_refs))
            else:
                raise ProgramError(f"unknown op {t[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ProgramError(f"line {lineno}: {exc}") from None
    if num_wires is None or k is None or sorted(alloc) != list(range(num_wires)):
        raise ProgramError("incomplete header")
    # ebit operands name the wire through the entangle op that shared it
    homes = {op.ebit: op.home_wire for op in ops if isinstance(op, CatEntangle)}
    resolved = []
    for op in ops:
        if isinstance(op, tuple):
            _, name, qpu, wires, refs = op
            halves = {}
            for idx, eid in refs:
                wires[idx] = homes[eid]
                halves[homes[eid]] = eid
            kind = "cz" if name == "rcz" else "ccz"
            op = RemoteGate(Gate(kind, tuple(wires)), qpu, halves)
        resolved.append(op)
    return _program(k, num_wires, [alloc[w] for w in range(num_wires)], resolved)


def stats_json(stats: dict) -> str:
    return json.dumps(stats, indent=2, sort_keys=True)


__all__ = [
    "CatDisentangle",
    "CatEntangle",
    "DistributedProgram",
    "EbitCreate",
    "LocalGate",
    "ProgramError",
    "RemoteGate",
    "Teleport",
    "check_program",
    "concatenate",
    "distribute",
    "ebit_liveness",
    "ebit_stats",
    "graph_baseline_distribute",
    "read_program",
    "write_program",
]
