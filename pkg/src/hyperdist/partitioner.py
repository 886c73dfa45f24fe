"""Balanced k-way hypergraph partitioning under the connectivity-minus-one metric.

``partition_multilevel`` is the production heuristic (coarsening by pair
merging, region-growing initial partitions, k-way FM refinement while
uncoarsening). ``brute_force_partition`` (enumeration) and
``exact_partition`` (integer program) are exact oracles for small instances
and share no code with it beyond the metric helpers.
"""

from __future__ import annotations

import heapq
import logging
import random
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

from .hypergraph import Hypergraph, HypergraphError, Partition, capacity, read_partition_file

log = logging.getLogger(__name__)

# hyperedges larger than this are ignored when scoring merge candidates
_MAX_SWAP_VERTICES = 200
_MAX_SCORED_HEDGE = 500


class InfeasibleBalanceError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionerConfig:
    k: int = 2
    epsilon: float = 0.03
    seed: int = 0
    restarts: int = 8
    coarsen_target: int | None = None
    max_fm_passes: int = 16
    v_cycles: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_fm_passes < 0:
            raise ValueError("max_fm_passes must be non-negative")
        if self.v_cycles < 0:
            raise ValueError("v_cycles must be non-negative")

    @property
    def target(self) -> int:
        return self.coarsen_target if self.coarsen_target is not None else 30 * self.k


class _Level:
    """A (possibly coarsened) hypergraph with weighted, deduplicated hyperedges."""

    __slots__ = ("n", "weights", "pins", "hweights", "inc")

    def __init__(self, n, weights, pins, hweights):
        self.n = n
        self.weights = weights
        self.pins = pins
        self.hweights = hweights
        self.inc = [[] for _ in range(n)]
        for i, p in enumerate(pins):
            for v in p:
                self.inc[v].append(i)

    @classmethod
    def from_hypergraph(cls, h: Hypergraph) -> _Level:
        merged: dict[tuple, int] = {}
        for e in h.hyperedges:
            pins = tuple(sorted(set(e)))
            if len(pins) > 1:
                merged[pins] = merged.get(pins, 0) + 1
        return cls(h.num_vertices, list(h.vertex_weights), list(merged), list(merged.values()))

    def cut(self, labels) -> int:
        return sum(w * (len({labels[v] for v in p}) - 1) for p, w in zip(self.pins, self.hweights))


def _check_feasible(h: Hypergraph, k: int, epsilon: float) -> float:
    positive = [w for w in h.vertex_weights if w > 0]
    if k > 1 and len(positive) < k:
        raise InfeasibleBalanceError(f"k={k} exceeds the {len(positive)} positive-weight vertices")
    cap = capacity(h.total_weight, k, epsilon)
    if positive and max(positive) > cap + 1e-9:
        raise InfeasibleBalanceError(f"a vertex of weight {max(positive)} exceeds block capacity {cap:.3f}")
    return cap


# -- coarsening ---------------------------------------------------------------


def _coarsen(level: _Level, rng: random.Random, max_weight: float, labels=None) -> tuple[_Level, list[int]]:
    """One round of first-choice clustering.

    Vertices are visited in random order; an unclustered vertex joins the
    cluster of its best-rated neighbour (rating: sum over shared hyperedges
    of 1/(|e|-1)) if the merged weight stays within ``max_weight``. With
    ``labels``, only vertices of the same block are clustered together.
    """
    n, w, pins, hw, inc = level.n, level.weights, level.pins, level.hweights, level.inc
    cluster = list(range(n))
    cw = list(w)
    joined = [False] * n
    order = list(range(n))
    rng.shuffle(order)
    for u in order:
        if joined[u] or cluster[u] != u:
            continue
        scores: dict[int, float] = defaultdict(float)
        for e in inc[u]:
            p = pins[e]
            if len(p) > _MAX_SCORED_HEDGE:
                continue
            s = hw[e] / (len(p) - 1)
            for v in p:
                if v != u:
                    scores[cluster[v]] += s
        best = None
        for c, s in scores.items():
            if c == u or cw[c] + cw[u] > max_weight or (labels is not None and labels[c] != labels[u]):
                continue
            if best is None or (s, -c) > best[0]:
                best = ((s, -c), c)
        if best is None:
            continue
        c = best[1]
        cluster[u] = c
        cw[c] += cw[u]
        joined[u] = joined[c] = True
    cmap = [-1] * n
    weights = []
    for v in range(n):
        root = cluster[v]
        if cmap[root] < 0:
            cmap[root] = len(weights)
            weights.append(cw[root])
        cmap[v] = cmap[root]
    merged: dict[tuple, int] = {}
    for p, x in zip(pins, hw):
        cp = tuple(sorted({cmap[v] for v in p}))
        if len(cp) > 1:
            merged[cp] = merged.get(cp, 0) + x
    return _Level(len(weights), weights, list(merged), list(merged.values())), cmap


# -- refinement ---------------------------------------------------------------


class _Refiner:
    """k-way Fiduccia-Mattheyses on the (lambda - 1) metric."""

    def __init__(self, level: _Level, labels: list[int], k: int, cap: float):
        self.level = level
        self.labels = labels
        self.k = k
        self.cap = cap + 1e-9
        self.pc: list[dict[int, int]] = []
        for p in level.pins:
            c: dict[int, int] = {}
            for v in p:
                c[labels[v]] = c.get(labels[v], 0) + 1
            self.pc.append(c)
        self.bw = [0] * k
        for v, b in enumerate(labels):
            self.bw[b] += level.weights[v]
        self.cut = sum(x * (len(c) - 1) for c, x in zip(self.pc, level.hweights))

    def best_move(self, v: int):
        """(gain, target) of the best move of ``v`` to an adjacent block."""
        a = self.labels[v]
        hw = self.level.hweights
        base = total = 0
        conn: dict[int, int] = {}
        for e in self.level.inc[v]:
            c = self.pc[e]
            x = hw[e]
            total += x
            if c[a] == 1:
                base += x
            for b in c:
                if b != a:
                    conn[b] = conn.get(b, 0) + x
        best = None
        for b in sorted(conn):
            g = base - total + conn[b]
            if best is None or g > best[0]:
                best = (g, b)
        return best

    def move(self, v: int, b: int) -> list[int]:
        """Move ``v`` to ``b``; return hyperedges whose pins' gains changed."""
        a = self.labels[v]
        self.labels[v] = b
        wv = self.level.weights[v]
        self.bw[a] -= wv
        self.bw[b] += wv
        touched = []
        for e in self.level.inc[v]:
            c = self.pc[e]
            before = len(c)
            na = c[a] - 1
            if na:
                c[a] = na
            else:
                del c[a]
            nb = c.get(b, 0) + 1
            c[b] = nb
            self.cut += self.level.hweights[e] * (len(c) - before)
            if na <= 1 or nb <= 2:
                touched.append(e)
        return touched

    def fm_pass(self) -> bool:
        level = self.level
        locked = [False] * level.n
        version = [0] * level.n
        heap: list = []

        def push(v):
            m = self.best_move(v)
            if m is not None:
                heapq.heappush(heap, (-m[0], v, m[1], version[v]))

        for v in range(level.n):
            if any(len(self.pc[e]) > 1 for e in level.inc[v]):
                push(v)
        start = best = self.cut
        moves: list[tuple[int, int]] = []
        best_len = 0
        patience = max(50, level.n // 20)
        stale = 0
        while heap:
            g, v, b, ver = heapq.heappop(heap)
            if locked[v] or ver != version[v]:
                continue
            if self.bw[b] + level.weights[v] > self.cap:
                continue
            a = self.labels[v]
            touched = self.move(v, b)
            locked[v] = True
            moves.append((v, a))
            if self.cut < best:
                best, best_len, stale = self.cut, len(moves), 0
            else:
                stale += 1
                if stale > patience:
                    break
            dirty = set()
            for e in touched:
                dirty.update(level.pins[e])
            for u in sorted(dirty):
                if not locked[u]:
                    version[u] += 1
                    push(u)
        for v, a in reversed(moves[best_len:]):
            self.move(v, a)
        return best < start

    def refine(self, max_passes: int) -> None:
        for _ in range(max_passes):
            if not self.fm_pass():
                break

    def rebalance(self) -> None:
        """Move positive-weight vertices out of overweight blocks, cheapest first."""
        level = self.level
        for _ in range(level.n):
            over = [b for b in range(self.k) if self.bw[b] > self.cap]
            if not over:
                return
            src = over[0]
            best = None
            for v in range(level.n):
                wv = level.weights[v]
                if self.labels[v] != src or wv <= 0:
                    continue
                for b in range(self.k):
                    if b == src or self.bw[b] + wv > self.cap:
                        continue
                    g = self._gain(v, b)
                    if best is None or g > best[0]:
                        best = (g, v, b)
            if best is None:
                return
            self.move(best[1], best[2])

    def swap_pass(self, max_rounds: int = 64) -> None:
        """Exchange equal-weight vertices across blocks while that lowers the cut.

        Single moves cannot change a partition sitting exactly at capacity;
        swaps can.
        """
        level = self.level
        for _ in range(max_rounds):
            best = None
            for u in range(level.n):
                a = self.labels[u]
                for v in range(u + 1, level.n):
                    b = self.labels[v]
                    if a == b or level.weights[u] != level.weights[v]:
                        continue
                    gu = self._gain(u, b)
                    self.move(u, b)
                    g = gu + self._gain(v, a)
                    self.move(u, a)
                    if g > 0 and (best is None or g > best[0]):
                        best = (g, u, v)
            if best is None:
                return
            _, u, v = best
            a, b = self.labels[u], self.labels[v]
            self.move(u, b)
            self.move(v, a)

    def _gain(self, v: int, b: int) -> int:
        a = self.labels[v]
        g = 0
        for e in self.level.inc[v]:
            c = self.pc[e]
            x = self.level.hweights[e]
            g += x * ((c[a] == 1) - (b not in c))
        return g

    def balanced(self) -> bool:
        return all(w <= self.cap for w in self.bw)


# -- initial partitioning -----------------------------------------------------


def _grow_regions(level: _Level, k: int, cap: float, rng: random.Random) -> list[int]:
    n, w, pins, hw, inc = level.n, level.weights, level.pins, level.hweights, level.inc
    labels = [-1] * n
    bw = [0.0] * k
    count = [0] * k
    conn: list[dict[int, float]] = [dict() for _ in range(k)]
    cap += 1e-9

    def assign(v, b):
        labels[v] = b
        bw[b] += w[v]
        count[b] += 1
        for c in conn:
            c.pop(v, None)
        for e in inc[v]:
            s = hw[e] / (len(pins[e]) - 1)
            for u in pins[e]:
                if labels[u] < 0:
                    conn[b][u] = conn[b].get(u, 0.0) + s

    seeds = rng.sample(range(n), min(k, n))
    for b, v in enumerate(seeds):
        if labels[v] < 0:
            assign(v, b)
    unassigned = n - sum(1 for x in labels if x >= 0)
    while unassigned:
        placed = False
        for b in sorted(range(k), key=lambda b: (bw[b], count[b], b)):
            cands = [(s, -u) for u, s in conn[b].items() if bw[b] + w[u] <= cap]
            if cands:
                assign(-max(cands)[1], b)
                placed = True
                break
        if not placed:
            free = [u for u in range(n) if labels[u] < 0]
            u = rng.choice(free)
            fits = [b for b in range(k) if bw[b] + w[u] <= cap]
            assign(u, min(fits or range(k), key=lambda b: (bw[b], count[b], b)))
        unassigned -= 1
    return labels


# -- driver -------------------------------------------------------------------


def _gate_sweep(h: Hypergraph, level: _Level, labels: list[int], k: int, cap: float) -> list[int]:
    ref = _Refiner(level, labels, k, cap)
    gates = range(h.num_wire_vertices, h.num_vertices)
    changed = True
    while changed:
        changed = False
        for v in gates:
            m = ref.best_move(v)
            if m is None or m[0] <= 0:
                continue
            if ref.bw[m[1]] + level.weights[v] > ref.cap:
                continue
            ref.move(v, m[1])
            changed = True
    return ref.labels


def _hierarchy(top: _Level, rng, max_cluster, target, labels=None, fold_weightless=False):
    levels, maps = [top], []
    while levels[-1].n > target or (fold_weightless and 0 in levels[-1].weights):
        sub = None
        if labels is not None:
            sub = labels
            for cmap in maps:
                nxt = [0] * (max(cmap) + 1)
                for v, c in enumerate(cmap):
                    nxt[c] = sub[v]
                sub = nxt
        coarse, cmap = _coarsen(levels[-1], rng, max_cluster, sub)
        if coarse.n > 0.95 * levels[-1].n:
            break
        levels.append(coarse)
        maps.append(cmap)
    log.debug("coarsened %d -> %d vertices in %d levels", levels[0].n, levels[-1].n, len(maps))
    return levels, maps


def _uncoarsen(levels, maps, labels, k, cap, passes):
    for level, cmap in zip(reversed(levels[:-1]), reversed(maps)):
        labels = [labels[cmap[v]] for v in range(level.n)]
        ref = _Refiner(level, labels, k, cap)
        ref.refine(passes)
        labels = ref.labels
    return labels


def partition_multilevel(h: Hypergraph, cfg: PartitionerConfig) -> Partition:
    """Partition ``h`` into ``cfg.k`` balanced blocks with few (lambda - 1) cuts."""
    if h.num_vertices == 0:
        raise HypergraphError("cannot partition an empty hypergraph")
    k = cfg.k
    if k == 1:
        return Partition.of(h, [0] * h.num_vertices, 1, cfg.epsilon)
    cap = _check_feasible(h, k, cfg.epsilon)
    rng = random.Random(cfg.seed)

    levels, maps = _hierarchy(_Level.from_hypergraph(h), rng, max(1.0, cap / 3), cfg.target)
    coarsest = levels[-1]
    best = None
    for r in range(cfg.restarts):
        labels = _grow_regions(coarsest, k, cap, random.Random(cfg.seed + r))
        ref = _Refiner(coarsest, labels, k, cap)
        ref.rebalance()
        ref.refine(cfg.max_fm_passes)
        if coarsest.n <= _MAX_SWAP_VERTICES:
            ref.swap_pass()
            ref.refine(cfg.max_fm_passes)
        key = (not ref.balanced(), ref.cut)
        if best is None or key < best[0]:
            best = (key, list(ref.labels))
    labels = _uncoarsen(levels, maps, best[1], k, cap, cfg.max_fm_passes)

    # V-cycles: re-coarsen inside the blocks, folding gate-vertices into their
    # wires, so that refinement can move a wire together with its gates
    for _ in range(cfg.v_cycles):
        before = levels[0].cut(labels)
        vl, vm = _hierarchy(levels[0], rng, max(1.0, cap / 3), cfg.target, labels, fold_weightless=True)
        coarse = labels
        for cmap, level in zip(vm, vl[1:]):
            nxt = [0] * level.n
            for v, c in enumerate(cmap):
                nxt[c] = coarse[v]
            coarse = nxt
        ref = _Refiner(vl[-1], coarse, k, cap)
        ref.refine(cfg.max_fm_passes)
        if vl[-1].n <= _MAX_SWAP_VERTICES:
            ref.swap_pass()
            ref.refine(cfg.max_fm_passes)
        labels = _uncoarsen(vl, vm, ref.labels, k, cap, cfg.max_fm_passes)
        if levels[0].cut(labels) >= before:
            break

    labels = _gate_sweep(h, levels[0], labels, k, cap)
    p = Partition.of(h, labels, k, cfg.epsilon)
    if any(x > cap + 1e-9 for x in p.block_weights(h)):
        raise InfeasibleBalanceError(f"no balanced {k}-way partition found (capacity {cap:.3f})")
    return p


# -- exact oracle -------------------------------------------------------------


def _restricted_growth(n: int, k: int):
    """Labelings of n items into k blocks, one per block-permutation class."""
    labels = [0] * n

    def rec(i, used):
        if i == n:
            yield labels
            return
        for b in range(min(used + 1, k)):
            labels[i] = b
            yield from rec(i + 1, max(used, b + 1))

    yield from rec(0, 0)


def _solve_component(free, hedges, pins, fixed_labels, k):
    """Exact placement of free vertices touching ``hedges`` by branch and bound."""
    counts = [defaultdict(int) for _ in hedges]
    local = {e: i for i, e in enumerate(hedges)}
    for i, e in enumerate(hedges):
        for v in pins[e]:
            if v in fixed_labels:
                counts[i][fixed_labels[v]] += 1
    by_vertex = {v: [local[e] for e in es] for v, es in free.items()}
    order = list(free)
    cost = sum(max(len(c) - 1, 0) for c in counts)
    best = [float("inf"), None]
    assign = {}

    def rec(i, cost):
        if cost >= best[0]:
            return
        if i == len(order):
            best[0], best[1] = cost, dict(assign)
            return
        v = order[i]
        for b in range(k):
            delta = 0
            for j in by_vertex[v]:
                c = counts[j]
                if c[b] == 0 and any(c.values()):
                    delta += 1
                c[b] += 1
            assign[v] = b
            rec(i + 1, cost + delta)
            for j in by_vertex[v]:
                counts[j][b] -= 1
        del assign[v]

    rec(0, cost)
    return best[0], best[1]


def brute_force_partition(h: Hypergraph, k: int, epsilon: float, limit: int = 10**7) -> Partition:
    """Exact minimum-cut balanced partition by enumeration.

    Positive-weight vertices are enumerated over all balanced labelings (up
    to block permutation). Zero-weight vertices do not affect balance, so for
    each labeling they are placed optimally per connected component of the
    free vertices, memoised on the labels of the fixed vertices the
    component touches.
    """
    n = h.num_vertices
    weights = h.vertex_weights
    fixed = [v for v in range(n) if weights[v] > 0]
    free = [v for v in range(n) if weights[v] <= 0]
    if k ** len(fixed) > limit:
        raise HypergraphError(f"instance too large for brute force: {k}^{len(fixed)} labelings")
    cap = capacity(h.total_weight, k, epsilon) + 1e-9
    pins = [tuple(set(e)) for e in h.hyperedges]

    # union-find over free vertices sharing a hyperedge
    parent = {v: v for v in free}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    free_set = set(free)
    for p in pins:
        fs = [v for v in p if v in free_set]
        for v in fs[1:]:
            parent[find(v)] = find(fs[0])
    comps: dict[int, dict] = {}
    fixed_only = []
    for e, p in enumerate(pins):
        fs = [v for v in p if v in free_set]
        if not fs:
            fixed_only.append(e)
            continue
        comp = comps.setdefault(find(fs[0]), {"hedges": [], "free": defaultdict(list)})
        comp["hedges"].append(e)
        for v in fs:
            comp["free"][v].append(e)
    isolated = [v for v in free if find(v) not in comps]
    for comp in comps.values():
        comp["boundary"] = sorted({v for e in comp["hedges"] for v in pins[e] if v not in free_set})
        comp["memo"] = {}

    best_cost, best_labels = None, None
    fixed_pos = {v: i for i, v in enumerate(fixed)}
    for lab in _restricted_growth(len(fixed), k):
        bw = [0.0] * k
        for v, b in zip(fixed, lab):
            bw[b] += weights[v]
        if any(x > cap for x in bw):
            continue
        cost = sum(len({lab[fixed_pos[v]] for v in pins[e]}) - 1 for e in fixed_only)
        if best_cost is not None and cost >= best_cost:
            continue
        for comp in comps.values():
            key = tuple(lab[fixed_pos[v]] for v in comp["boundary"])
            if key not in comp["memo"]:
                fl = dict(zip(comp["boundary"], key))
                comp["memo"][key] = _solve_component(comp["free"], comp["hedges"], pins, fl, k)
            cost += comp["memo"][key][0]
        if best_cost is None or cost < best_cost:
            best_cost = cost
            labels = [0] * n
            for v, b in zip(fixed, lab):
                labels[v] = b
            for comp in comps.values():
                key = tuple(lab[fixed_pos[v]] for v in comp["boundary"])
                for v, b in comp["memo"][key][1].items():
                    labels[v] = b
            best_labels = labels
    if best_labels is None:
        raise InfeasibleBalanceError(f"no balanced {k}-way labeling exists")
    for v in isolated:
        best_labels[v] = 0
    p = Partition.of(h, best_labels, k, epsilon)
    assert p.cut_count == best_cost
    return p


def exact_partition(h: Hypergraph, k: int, epsilon: float) -> Partition:
    """Exact minimum-cut balanced partition as a 0/1 integer program.

    Variables ``x[v,b]`` place vertex v in block b and ``y[e,b]`` mark that
    hyperedge e touches block b; the objective is sum(y) - #hyperedges.
    """
    n, m = h.num_vertices, len(h.hyperedges)
    if k == 1 or n == 0:
        return Partition.of(h, [0] * n, k, epsilon)
    cap = capacity(h.total_weight, k, epsilon) + 1e-9
    nx = n * k
    nvar = nx + m * k
    pins = [sorted(set(e)) for e in h.hyperedges]
    rows = n + k + sum(len(p) for p in pins) * k
    a = lil_matrix((rows, nvar))
    lo, hi = [], []
    r = 0
    for v in range(n):
        for b in range(k):
            a[r, v * k + b] = 1
        lo.append(1)
        hi.append(1)
        r += 1
    for b in range(k):
        for v in range(n):
            a[r, v * k + b] = h.vertex_weights[v]
        lo.append(-np.inf)
        hi.append(cap)
        r += 1
    for e, p in enumerate(pins):
        for v in p:
            for b in range(k):
                a[r, nx + e * k + b] = 1
                a[r, v * k + b] = -1
                lo.append(0)
                hi.append(np.inf)
                r += 1
    c = np.concatenate([np.zeros(nx), np.ones(m * k)])
    lb = np.zeros(nvar)
    # block symmetry: the first positive-weight vertex sits in block 0
    anchor = next((v for v in range(n) if h.vertex_weights[v] > 0), 0)
    lb[anchor * k] = 1
    res = milp(
        c,
        constraints=LinearConstraint(a.tocsr(), lo, hi),
        integrality=np.ones(nvar),
        bounds=Bounds(lb, np.ones(nvar)),
    )
    if res.status == 2:
        raise InfeasibleBalanceError(f"no balanced {k}-way labeling exists")
    if not res.success:
        raise HypergraphError(f"integer program failed: {res.message}")
    x = np.round(res.x[:nx]).reshape(n, k)
    labels = [int(np.argmax(row)) for row in x]
    p = Partition.of(h, labels, k, epsilon)
    if p.cut_count != round(res.fun) - m:
        raise HypergraphError("integer program returned an inconsistent solution")
    return p


def import_partition(h: Hypergraph, text: str, k: int, epsilon: float = 0.0) -> Partition:
    """Read an external partition file; balance is reported by the caller, not enforced."""
    return read_partition_file(text, h, k, epsilon)
