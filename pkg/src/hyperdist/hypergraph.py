"""Circuit-to-hypergraph encoding, partition metrics and hMETIS interchange.

Vertex ids ``0 .. num_wire_vertices-1`` are wire-vertices; the remaining
ids are gate-vertices (one per CZ/CCZ occurrence) in circuit order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .circuit import ENTANGLING, ONE_QUBIT, Circuit, CircuitError, Gate


class HypergraphError(ValueError):
    pass


@dataclass(frozen=True)
class GateVertex:
    position: int
    wires: tuple[int, ...]

    @property
    def arity(self) -> int:
        return len(self.wires)


@dataclass(frozen=True)
class Hypergraph:
    num_wire_vertices: int
    gate_vertices: tuple[GateVertex, ...] = ()
    hyperedges: tuple[tuple[int, ...], ...] = ()
    vertex_weights: tuple[int, ...] = None

    def __post_init__(self):
        n = self.num_wire_vertices + len(self.gate_vertices)
        if self.vertex_weights is None:
            object.__setattr__(
                self, "vertex_weights", (1,) * self.num_wire_vertices + (0,) * len(self.gate_vertices)
            )
        if len(self.vertex_weights) != n:
            raise HypergraphError(f"{len(self.vertex_weights)} weights for {n} vertices")
        for h in self.hyperedges:
            if not h:
                raise HypergraphError("empty hyperedge")
            if any(not 0 <= v < n for v in h):
                raise HypergraphError(f"hyperedge {h} references a vertex outside [0, {n})")

    @property
    def num_vertices(self) -> int:
        return self.num_wire_vertices + len(self.gate_vertices)

    @property
    def total_weight(self) -> int:
        return sum(self.vertex_weights)

    def is_wire(self, v: int) -> bool:
        return v < self.num_wire_vertices

    def incidence(self) -> list[list[int]]:
        """For each vertex, the indices of the hyperedges containing it."""
        inc = [[] for _ in range(self.num_vertices)]
        for i, h in enumerate(self.hyperedges):
            for v in h:
                inc[v].append(i)
        return inc

    def hedge_degree(self) -> list[int]:
        """Number of hyperedges containing each wire-vertex."""
        deg = [0] * self.num_wire_vertices
        for h in self.hyperedges:
            for v in h:
                if v < self.num_wire_vertices:
                    deg[v] += 1
        return deg

    def hedge_of(self) -> dict[tuple[int, int], int]:
        """Map (gate-vertex, wire) to the hyperedge joining them."""
        out = {}
        for i, h in enumerate(self.hyperedges):
            wire = h[0]
            for v in h[1:]:
                out[v, wire] = i
        return out


def check_circuit_hypergraph(h: Hypergraph) -> None:
    """Assert the structural invariants of a hypergraph built from a circuit."""
    memberships = [0] * h.num_vertices
    for e in h.hyperedges:
        wires = [v for v in e if h.is_wire(v)]
        if len(wires) != 1 or e[0] != wires[0]:
            raise HypergraphError(f"hyperedge {e} must start with its single wire-vertex")
        for v in e:
            memberships[v] += 1
    for i, gv in enumerate(h.gate_vertices):
        v = h.num_wire_vertices + i
        if memberships[v] != gv.arity:
            raise HypergraphError(f"gate-vertex {v} is in {memberships[v]} hyperedges, expected {gv.arity}")


def build_hypergraph(
    c: Circuit, window: int | None = None, weights: str = "wires", window_rule: str = "span"
) -> Hypergraph:
    """Encode ``c`` as a hypergraph.

    Per wire, a running hyperedge starts at the wire-vertex and collects the
    CZ/CCZ gate-vertices on that wire. Any other gate on the wire closes it.
    Hyperedges without gate-vertices are dropped.

    With ``window`` set, a hyperedge is also closed before a gate that lies
    more than ``window`` circuit positions after its first member
    (``window_rule="span"``), or after the previous member
    (``window_rule="gap"``). Only the span rule bounds how long the ebits
    of the hyperedge stay alive.

    ``weights="wires"`` balances on qubits (gate-vertices weigh 0);
    ``weights="all"`` gives every vertex weight 1.
    """
    if window is not None and window < 0:
        raise HypergraphError("window must be non-negative")
    if window_rule not in ("span", "gap"):
        raise HypergraphError(f"unknown window rule {window_rule!r}")
    n = c.num_wires
    running: list[list[int]] = [[w] for w in range(n)]
    # position of the first (span rule) or latest (gap rule) member of each running hedge
    anchor = [0] * n
    per_wire: list[list[tuple[int, ...]]] = [[] for _ in range(n)]
    gate_vertices: list[GateVertex] = []

    def close(w):
        if len(running[w]) > 1:
            per_wire[w].append(tuple(running[w]))
        running[w] = [w]

    for pos, g in enumerate(c.gates):
        if g.kind in ENTANGLING:
            v = n + len(gate_vertices)
            gate_vertices.append(GateVertex(pos, g.wires))
            for w in g.wires:
                if window is not None and len(running[w]) > 1 and pos - anchor[w] > window:
                    close(w)
                if len(running[w]) == 1 or window_rule == "gap":
                    anchor[w] = pos
                running[w].append(v)
        elif g.kind in ONE_QUBIT:
            close(g.wires[0])
        else:
            raise HypergraphError(f"gate {g} at position {pos} is not in the CZ gateset")
    for w in range(n):
        close(w)
    if weights == "wires":
        vw = (1,) * n + (0,) * len(gate_vertices)
    elif weights == "all":
        vw = (1,) * (n + len(gate_vertices))
    else:
        raise HypergraphError(f"unknown weight mode {weights!r}")
    hedges = tuple(e for w in range(n) for e in per_wire[w])
    return Hypergraph(n, tuple(gate_vertices), hedges, vw)


# -- partitions and metrics ---------------------------------------------------


@dataclass(frozen=True)
class Partition:
    labels: tuple[int, ...]
    k: int
    epsilon: float = 0.0
    cut_count: int = field(default=0)

    @classmethod
    def of(cls, h: Hypergraph, labels: Sequence[int], k: int | None = None, epsilon: float = 0.0) -> Partition:
        labels = tuple(int(b) for b in labels)
        if k is None:
            k = max(labels, default=0) + 1
        if len(labels) != h.num_vertices:
            raise HypergraphError(f"{len(labels)} labels for {h.num_vertices} vertices")
        if any(not 0 <= b < k for b in labels):
            raise HypergraphError(f"block ids must lie in [0, {k})")
        return cls(labels, k, epsilon, cut_count(h, labels))

    def block_weights(self, h: Hypergraph) -> list[int]:
        out = [0] * self.k
        for v, b in enumerate(self.labels):
            out[b] += h.vertex_weights[v]
        return out


def _labels(p) -> Sequence[int]:
    return p.labels if isinstance(p, Partition) else p


def cut_count(h: Hypergraph, p: Partition | Sequence[int]) -> int:
    """Sum over hyperedges of (number of distinct blocks touched - 1)."""
    labels = _labels(p)
    if len(labels) < h.num_vertices:
        raise HypergraphError(f"vertex {len(labels)} is unlabeled")
    return sum(len({labels[v] for v in e}) - 1 for e in h.hyperedges)


def capacity(total_weight: float, k: int, epsilon: float) -> float:
    """Largest admissible block weight: (1 + epsilon) * ceil(W / k)."""
    return (1 + epsilon) * math.ceil(total_weight / k)


def balance_ok(h: Hypergraph, p: Partition) -> bool:
    cap = capacity(h.total_weight, p.k, p.epsilon)
    return all(w <= cap + 1e-9 for w in p.block_weights(h))


# -- hMETIS interchange -------------------------------------------------------


def write_hgr(h: Hypergraph) -> str:
    """hMETIS text with vertex weights (format code 10), 1-based vertex ids."""
    lines = [f"{len(h.hyperedges)} {h.num_vertices} 10"]
    lines += [" ".join(str(v + 1) for v in e) for e in h.hyperedges]
    lines += [str(w) for w in h.vertex_weights]
    return "\n".join(lines)


def _data_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("%")]


def read_hgr(text: str, num_wire_vertices: int | None = None) -> Hypergraph:
    """Parse hMETIS text (codes 0, 1, 10, 11; hyperedge weights are ignored).

    Without ``num_wire_vertices`` every vertex is treated as a wire-vertex.
    """
    lines = _data_lines(text)
    if not lines:
        raise HypergraphError("empty hgr file")
    try:
        head = [int(x) for x in lines[0].split()]
        num_edges, num_vertices = head[0], head[1]
        fmt = head[2] if len(head) > 2 else 0
        if fmt not in (0, 1, 10, 11):
            raise HypergraphError(f"unsupported hgr format code {fmt}")
        expected = 1 + num_edges + (num_vertices if fmt in (10, 11) else 0)
        if len(lines) != expected:
            raise HypergraphError(f"expected {expected} lines, found {len(lines)}")
        edges = []
        for ln in lines[1 : 1 + num_edges]:
            pins = [int(x) for x in ln.split()]
            if fmt in (1, 11):
                pins = pins[1:]
            edges.append(tuple(v - 1 for v in pins))
        if fmt in (10, 11):
            weights = tuple(int(ln.split()[0]) for ln in lines[1 + num_edges :])
        else:
            weights = (1,) * num_vertices
    except (ValueError, IndexError) as exc:
        raise HypergraphError(f"malformed hgr file: {exc}") from None
    if num_wire_vertices is None:
        num_wire_vertices = num_vertices
    gates = tuple(GateVertex(-1, ()) for _ in range(num_vertices - num_wire_vertices))
    return Hypergraph(num_wire_vertices, gates, tuple(edges), weights)


def write_partition_file(p: Partition) -> str:
    return "\n".join(str(b) for b in p.labels)


def read_partition_file(text: str, h: Hypergraph, k: int | None = None, epsilon: float = 0.0) -> Partition:
    lines = _data_lines(text)
    if len(lines) != h.num_vertices:
        raise HypergraphError(f"partition file has {len(lines)} entries, hypergraph has {h.num_vertices} vertices")
    try:
        labels = [int(ln.split()[0]) for ln in lines]
    except ValueError as exc:
        raise HypergraphError(f"malformed partition file: {exc}") from None
    return Partition.of(h, labels, k, epsilon)


# -- the dual construction ----------------------------------------------------


def dummy_circuit_from_hypergraph(h: Hypergraph) -> Circuit:
    """A circuit whose distribution problem encodes partitioning ``h``.

    One wire per vertex; per hyperedge, CZs from its lowest vertex to every
    other member, then an H on every member.
    """
    if h.gate_vertices:
        raise HypergraphError("dummy circuits are built from gate-vertex-free hypergraphs")
    gates = []
    for e in h.hyperedges:
        members = sorted(set(e))
        if len(members) < 2:
            raise HypergraphError(f"hyperedge {e} has fewer than 2 vertices")
        pivot, rest = members[0], members[1:]
        gates += [Gate("cz", (pivot, v)) for v in rest]
        gates += [Gate("h", (v,)) for v in members]
    return Circuit(h.num_wire_vertices, tuple(gates), "dummy")


def merge_extended(h_ext: Hypergraph) -> Hypergraph:
    """Undo the dummy-circuit extension: fold each gate-vertex into a wire-vertex.

    Each gate-vertex is merged into the wire-vertex of a 2-element hyperedge
    it belongs to; the now-singleton hyperedges disappear.
    """
    n = h_ext.num_wire_vertices
    target: dict[int, int] = {}
    for e in h_ext.hyperedges:
        if len(e) == 2 and h_ext.is_wire(e[0]) and not h_ext.is_wire(e[1]):
            target.setdefault(e[1], e[0])
    for i in range(len(h_ext.gate_vertices)):
        if n + i not in target:
            raise HypergraphError(f"gate-vertex {n + i} has no 2-element hyperedge")
    merged = []
    for e in h_ext.hyperedges:
        vs = sorted({target.get(v, v) for v in e})
        if len(vs) >= 2:
            merged.append(tuple(vs))
    return Hypergraph(n, (), tuple(merged))


def same_hypergraph(a: Hypergraph, b: Hypergraph) -> bool:
    """Equality up to hyperedge order and pin order."""
    return (
        a.num_vertices == b.num_vertices
        and a.num_wire_vertices == b.num_wire_vertices
        and sorted(tuple(sorted(e)) for e in a.hyperedges) == sorted(tuple(sorted(e)) for e in b.hyperedges)
    )


__all__ = [
    "GateVertex",
    "Hypergraph",
    "HypergraphError",
    "Partition",
    "balance_ok",
    "build_hypergraph",
    "capacity",
    "check_circuit_hypergraph",
    "cut_count",
    "dummy_circuit_from_hypergraph",
    "merge_extended",
    "read_hgr",
    "read_partition_file",
    "same_hypergraph",
    "write_hgr",
    "write_partition_file",
]
