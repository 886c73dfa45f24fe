"""Split a circuit into segments, partition each one and merge by discrepancy.

Adjacent segments that would allocate their busy wires alike are merged;
where allocations differ, the wires are teleported between segments at
one ebit each.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .circuit import ENTANGLING, Circuit
from .distributor import DistributedProgram, concatenate, distribute
from .hypergraph import Hypergraph, HypergraphError, Partition, build_hypergraph
from .partitioner import PartitionerConfig, partition_multilevel

log = logging.getLogger(__name__)

DEFAULT_SEGMENT_WINDOW = 50
DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class SegmentConfig:
    k: int = 2
    epsilon: float = 0.03
    seed: int = 0
    window: int | None = None
    segment_window: int = DEFAULT_SEGMENT_WINDOW
    mode: str = "auto"
    threshold: float = DEFAULT_THRESHOLD
    align: bool = True
    restarts: int = 8

    def __post_init__(self):
        if self.segment_window < 1:
            raise ValueError("segment_window must be at least 1")
        if self.mode not in ("auto", "threshold"):
            raise ValueError(f"unknown segmentation mode {self.mode!r}")

    def partitioner(self, offset: int) -> PartitionerConfig:
        return PartitionerConfig(k=self.k, epsilon=self.epsilon, seed=self.seed + offset, restarts=self.restarts)


@dataclass(frozen=True)
class Segment:
    gate_range: tuple[int, int]
    circuit: Circuit
    hypergraph: Hypergraph
    partition: Partition

    @property
    def hedge_degree(self) -> list[int]:
        return self.hypergraph.hedge_degree()

    @property
    def hedge_total(self) -> int:
        return len(self.hypergraph.hyperedges)

    @property
    def cut_count(self) -> int:
        return self.partition.cut_count

    @property
    def wire_labels(self) -> tuple[int, ...]:
        return self.partition.labels[: self.circuit.num_wires]


@dataclass(frozen=True)
class SegmentPlan:
    segments: tuple[Segment, ...]
    teleports: tuple[tuple[int, int, int, int], ...] = field(default=())

    @property
    def total_ebits(self) -> int:
        return sum(s.cut_count for s in self.segments) + len(self.teleports)


def preliminary_split(c: Circuit, segment_window: int) -> list[tuple[int, int]]:
    """Ranges holding ``segment_window`` CZ/CCZ gates each; one-qubit gates go with the next one."""
    if segment_window < 1:
        raise ValueError("segment_window must be at least 1")
    ranges = []
    start = seen = 0
    for pos, g in enumerate(c.gates):
        if g.kind in ENTANGLING:
            seen += 1
            if seen == segment_window:
                ranges.append((start, pos + 1))
                start, seen = pos + 1, 0
    if start < len(c.gates) or not ranges:
        if ranges and seen == 0:
            ranges[-1] = (ranges[-1][0], len(c.gates))
        else:
            ranges.append((start, len(c.gates)))
    return ranges


def block_matching(reference, labels, k: int, weights=None) -> dict[int, int]:
    """Block permutation mapping ``labels`` onto ``reference`` with the most (weighted) agreements."""
    agree = np.zeros((k, k))
    for i, (a, b) in enumerate(zip(reference, labels)):
        agree[a, b] += 1 if weights is None else weights[i]
    rows, cols = linear_sum_assignment(agree, maximize=True)
    return {int(b): int(a) for a, b in zip(rows, cols)}


def align_labels(reference, labels, k: int, weights=None) -> list[int]:
    perm = block_matching(reference, labels, k, weights)
    return [perm[b] for b in labels]


def _relabel(seg: Segment, wire_ref, k: int) -> Segment:
    perm = block_matching(wire_ref, seg.wire_labels, k)
    p = Partition.of(seg.hypergraph, [perm[b] for b in seg.partition.labels], k, seg.partition.epsilon)
    return Segment(seg.gate_range, seg.circuit, seg.hypergraph, p)


def discrepancy(s: Segment, r: Segment, align: bool = True) -> float:
    """Allocation disagreement between two segments, weighted by how busy each wire is in both."""
    n = s.circuit.num_wires
    if r.circuit.num_wires != n:
        raise HypergraphError("segments cover different wire sets")
    if s.partition.k != r.partition.k:
        raise HypergraphError("segments are partitioned into different numbers of blocks")
    denom = min(s.hedge_total, r.hedge_total)
    if denom == 0:
        return 0.0
    ls, lr = list(s.wire_labels), list(r.wire_labels)
    hs, hr = s.hedge_degree, r.hedge_degree
    busy = [min(hs[w], hr[w]) for w in range(n)]
    if align:
        # weighting the matching by busy-ness makes it minimise the score itself
        lr = align_labels(ls, lr, s.partition.k, busy)
    num = sum(busy[w] for w in range(n) if ls[w] != lr[w])
    return num / denom


class _Planner:
    """Partitions segments on demand, caching by gate range."""

    def __init__(self, c: Circuit, cfg: SegmentConfig, starts: list[int]):
        self.c = c
        self.cfg = cfg
        self.offset = {s: i for i, s in enumerate(starts)}
        self.cache: dict[tuple[int, int], Segment] = {}

    def segment(self, rng: tuple[int, int]) -> Segment:
        if rng not in self.cache:
            sub = self.c.with_gates(self.c.gates[rng[0] : rng[1]])
            h = build_hypergraph(sub, window=self.cfg.window)
            p = partition_multilevel(h, self.cfg.partitioner(self.offset[rng[0]]))
            self.cache[rng] = Segment(rng, sub, h, p)
        return self.cache[rng]

    def plan(self, ranges) -> SegmentPlan:
        segs = []
        teleports = []
        k = self.cfg.k
        for i, rng in enumerate(ranges):
            seg = self.segment(rng)
            if segs and self.cfg.align:
                seg = _relabel(seg, segs[-1].wire_labels, k)
            if segs:
                prev = segs[-1].wire_labels
                teleports += [(w, a, b, i) for w, (a, b) in enumerate(zip(prev, seg.wire_labels)) if a != b]
            segs.append(seg)
        return SegmentPlan(tuple(segs), tuple(teleports))

    def delta(self, a, b) -> float:
        return discrepancy(self.segment(a), self.segment(b), self.cfg.align)


def _merge(ranges, i):
    return ranges[:i] + [(ranges[i][0], ranges[i + 1][1])] + ranges[i + 2 :]


def plan_segments(c: Circuit, cfg: SegmentConfig) -> SegmentPlan:
    """Segment ``c`` and pick which adjacent segments to merge.

    ``threshold`` mode walks left to right, merging the current segment with
    the next while their discrepancy is below ``cfg.threshold``. ``auto``
    mode tries adjacent pairs in order of increasing discrepancy and
    performs the first merge that lowers the plan's total ebits, until no
    merge does; the single-segment plan is kept if it is no worse.
    """
    ranges = preliminary_split(c, cfg.segment_window)
    planner = _Planner(c, cfg, [r[0] for r in ranges])
    if cfg.mode == "threshold":
        i = 0
        while i < len(ranges) - 1:
            if planner.delta(ranges[i], ranges[i + 1]) < cfg.threshold:
                ranges = _merge(ranges, i)
            else:
                i += 1
        return planner.plan(ranges)

    best = planner.plan(ranges)
    while len(ranges) > 1:
        order = sorted(range(len(ranges) - 1), key=lambda i: (planner.delta(ranges[i], ranges[i + 1]), i))
        for i in order:
            cand = _merge(ranges, i)
            plan = planner.plan(cand)
            if plan.total_ebits < best.total_ebits:
                ranges, best = cand, plan
                break
        else:
            break
    log.debug("auto segmentation kept %d segments, %d ebits", len(ranges), best.total_ebits)
    if len(ranges) > 1:
        whole = planner.plan([(0, len(c.gates))])
        if whole.total_ebits <= best.total_ebits:
            best = whole
    return best


def distribute_segmented(plan: SegmentPlan, c: Circuit) -> DistributedProgram:
    """Run each segment's program in turn, teleporting wires whose QPU changes at a boundary."""
    if not plan.segments:
        raise HypergraphError("empty plan")
    k = plan.segments[0].partition.k
    parts = [distribute(s.circuit, s.hypergraph, s.partition) for s in plan.segments]
    dp = concatenate(parts, k, c.num_wires)
    if dp.ebit_count != plan.total_ebits:
        raise HypergraphError(f"program uses {dp.ebit_count} ebits, plan accounts for {plan.total_ebits}")
    return dp


def plan_summary(plan: SegmentPlan, align: bool = True) -> dict:
    segs = plan.segments
    return {
        "segments": [
            {"gate_range": list(s.gate_range), "cut_count": s.cut_count, "hedges": s.hedge_total} for s in segs
        ],
        "discrepancy": [discrepancy(a, b, align) for a, b in zip(segs, segs[1:])],
        "teleports": [list(t) for t in plan.teleports],
        "total_ebits": plan.total_ebits,
    }


def plan_json(plan: SegmentPlan, align: bool = True) -> str:
    return json.dumps(plan_summary(plan, align), indent=2)
