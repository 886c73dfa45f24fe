import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperdist.circuit import gen_random, parse_circuit, rewrite_to_cz_gateset
from hyperdist.distributor import (
    CatDisentangle,
    CatEntangle,
    DistributedProgram,
    EbitCreate,
    LocalGate,
    ProgramError,
    RemoteGate,
    Teleport,
    check_program,
    concatenate,
    distribute,
    ebit_liveness,
    ebit_stats,
    graph_baseline_distribute,
    per_gate_labels,
    read_program,
    wire_graph,
    write_program,
)
from hyperdist.hypergraph import HypergraphError, Partition, build_hypergraph, cut_count
from hyperdist.partitioner import PartitionerConfig, partition_multilevel
from hyperdist.verifier import check_program_equivalence, random_state

from _fixtures import fig1, fig5_partition_labels


def fig2():
    """alpha = CZ(B, C) and beta = CZ(A, B) share wire B, which sits alone on QPU 0."""
    c = parse_circuit("qubits 3\ncz 1 2\ncz 0 1")
    h = build_hypergraph(c)
    return c, h, Partition.of(h, [1, 0, 1, 1, 1], 2)


def kinds(dp):
    return [type(op).__name__ for op in dp.ops]


def test_fig2_gadget():
    c, h, p = fig2()
    dp = distribute(c, h, p)
    assert kinds(dp) == ["EbitCreate", "CatEntangle", "RemoteGate", "RemoteGate", "CatDisentangle"]
    assert dp.ops[0] == EbitCreate(0, 0, 1)
    assert dp.ops[1] == CatEntangle(0, 1)
    assert all(op.halves == {1: 0} and op.qpu == 1 for op in dp.ops[2:4])
    assert dp.ebit_count == 1 == p.cut_count
    check_program(dp, c)


def test_fig2_stats():
    c, h, p = fig2()
    stats = ebit_stats(distribute(c, h, p), c)
    assert stats["ebit_peak"] == 2
    assert stats["overhead"] == pytest.approx(2 / 3)
    assert stats["ebits_per_cz"] == pytest.approx(0.5)
    assert stats["per_qpu_wires"] == [1, 2]


def test_single_block_is_local():
    c, h = fig1()
    dp = distribute(c, h, Partition.of(h, [0] * 9, 2))
    assert dp.ebit_count == 0
    assert all(isinstance(op, LocalGate) for op in dp.ops)
    stats = ebit_stats(dp, c)
    assert stats["ebits_per_cz"] == 0 and stats["overhead"] == 0


def test_fig5_two_ebits():
    c, h = fig1()
    dp = distribute(c, h, Partition.of(h, fig5_partition_labels(), 2))
    assert dp.ebit_count == 2
    check_program(dp, c)


def test_ccz_across_three_blocks():
    c = parse_circuit("qubits 3\nccz 0 1 2")
    h = build_hypergraph(c)
    dp = distribute(c, h, Partition.of(h, [0, 1, 2, 0], 3))
    assert dp.ebit_count == 2
    (remote,) = [op for op in dp.ops if isinstance(op, RemoteGate)]
    assert set(remote.halves) == {1, 2} and remote.qpu == 0
    assert check_program_equivalence(dp, c, random_state(3, np.random.default_rng(1)))


def test_partition_mismatch():
    c, h = fig1()
    other = build_hypergraph(parse_circuit("qubits 4\ncz 0 1"))
    with pytest.raises(HypergraphError):
        distribute(c, other, Partition.of(other, [0] * other.num_vertices, 2))
    with pytest.raises(ValueError):
        distribute(c, h, Partition.of(h, [0] * 9, 2), schedule="fastest")


def _random_instance(seed, max_wires=12, max_gates=60):
    rng = random.Random(seed)
    n = rng.randint(3, max_wires)
    c = gen_random(n, rng.randint(0, max_gates), rng.choice([0.0, 0.2, 0.4]), seed)
    h = build_hypergraph(c, window=rng.choice([None, None, 4]))
    k = rng.randint(2, 4)
    return c, h, Partition.of(h, [rng.randrange(k) for _ in range(h.num_vertices)], k)


@given(st.integers(0, 10**6), st.sampled_from(["greedy", "source"]))
def test_ebits_equal_cuts(seed, schedule):
    c, h, p = _random_instance(seed)
    dp = distribute(c, h, p, schedule=schedule)
    assert dp.ebit_count == cut_count(h, p) == p.cut_count
    check_program(dp, c)


@given(st.integers(0, 10**6), st.sampled_from(["greedy", "source"]))
def test_distributed_equals_circuit(seed, schedule):
    c, h, p = _random_instance(seed, max_wires=6, max_gates=25)
    dp = distribute(c, h, p, schedule=schedule)
    state = random_state(c.num_wires, np.random.default_rng(seed))
    assert check_program_equivalence(dp, c, state, max_exhaustive=8, samples=6, seed=seed)


def test_greedy_schedule_shortens_liveness():
    c = rewrite_to_cz_gateset(gen_random(16, 400, seed=5))
    h = build_hypergraph(c, window=30)
    rng = random.Random(0)
    p = Partition.of(h, [rng.randrange(4) for _ in range(h.num_vertices)], 4)
    greedy, source = distribute(c, h, p), distribute(c, h, p, schedule="source")
    assert greedy.ebit_count == source.ebit_count
    assert greedy.ebit_peak <= source.ebit_peak


def test_ebit_ids_sequential():
    c, h, p = _random_instance(3)
    created = [op.ebit for op in distribute(c, h, p).ops if isinstance(op, EbitCreate)]
    assert created == list(range(len(created)))


def test_liveness_replay():
    ops = [EbitCreate(0, 0, 1), CatEntangle(0, 0), EbitCreate(1, 0, 1), CatEntangle(1, 0), CatDisentangle(0)]
    assert ebit_liveness(ops) == 3
    assert ebit_liveness([Teleport(0, 0, 1)]) == 2


# -- validation ---------------------------------------------------------------


def _replace(dp, ops):
    return DistributedProgram(dp.k, dp.num_wires, dp.wire_alloc, tuple(ops), dp.ebit_count, dp.ebit_peak)


def test_check_catches_missing_disentangle():
    c, h, p = fig2()
    dp = distribute(c, h, p)
    with pytest.raises(ProgramError, match="never disentangled"):
        check_program(_replace(dp, dp.ops[:-1]))


def test_check_catches_wrong_qpu():
    c, h, p = fig2()
    dp = distribute(c, h, p)
    ops = list(dp.ops)
    ops[2] = RemoteGate(ops[2].gate, 0, ops[2].halves)
    with pytest.raises(ProgramError):
        check_program(_replace(dp, ops))


def test_check_catches_reordering():
    c, h, p = fig2()
    dp = distribute(c, h, p)
    ops = list(dp.ops)
    ops[2], ops[3] = ops[3], ops[2]
    with pytest.raises(ProgramError, match="order"):
        check_program(_replace(dp, ops), c)


def test_check_catches_bad_peak():
    c, h, p = fig2()
    dp = distribute(c, h, p)
    bad = DistributedProgram(dp.k, dp.num_wires, dp.wire_alloc, dp.ops, dp.ebit_count, 7)
    with pytest.raises(ProgramError, match="peak"):
        check_program(bad)


# -- baseline -------------------------------------------------------------------


def test_baseline_pays_per_gate():
    c = parse_circuit("qubits 4\ncz 0 1\ncz 0 2\ncz 0 3")
    hyper = build_hypergraph(c)
    p = Partition.of(hyper, [0, 1, 1, 1, 1, 1, 1], 2)
    assert distribute(c, hyper, p).ebit_count == 1
    per_gate = build_hypergraph(c, window=0)
    labels = per_gate_labels(c, per_gate, [0, 1, 1, 1])
    assert distribute(c, per_gate, Partition.of(per_gate, labels, 2)).ebit_count == 3


def test_baseline_local():
    c = parse_circuit("qubits 3\ncz 0 1\nccz 0 1 2")
    assert graph_baseline_distribute(c, 1).ebit_count == 0


def test_baseline_ccz_costs_two_when_split_three_ways():
    c = parse_circuit("qubits 3\nccz 0 1 2")
    h = build_hypergraph(c, window=0)
    assert distribute(c, h, Partition.of(h, per_gate_labels(c, h, [0, 1, 2]), 3)).ebit_count == 2


def test_wire_graph_edges():
    g = wire_graph(parse_circuit("qubits 3\ncz 0 1\nh 2\nccz 0 1 2"))
    assert g.hyperedges == ((0, 1), (0, 1), (0, 2), (1, 2))


def test_baseline_no_better_on_average():
    base = hyper = 0
    for seed in range(4):
        c = gen_random(10, 120, seed=seed)
        base += graph_baseline_distribute(c, 2, 0.1, seed).ebit_count
        h = build_hypergraph(c)
        hyper += partition_multilevel(h, PartitionerConfig(k=2, epsilon=0.1, seed=seed)).cut_count
    assert hyper <= base


# -- text format ----------------------------------------------------------------


def test_program_text():
    c, h, p = fig2()
    text = write_program(distribute(c, h, p))
    assert text.splitlines() == [
        "dqc-dist v1",
        "qubits 3",
        "qpus 2",
        "alloc 0 1",
        "alloc 1 0",
        "alloc 2 1",
        "begin",
        "ebit 0 0 1",
        "entangle 0 1",
        "rcz @1 e0 2",
        "rcz @1 0 e0",
        "disentangle 0",
        "end",
    ]


@given(st.integers(0, 10**6))
def test_program_round_trip(seed):
    c, h, p = _random_instance(seed)
    dp = distribute(c, h, p)
    assert read_program(write_program(dp)) == dp


def test_round_trip_with_teleport():
    c, h, p = fig2()
    a = distribute(c, h, p)
    b = distribute(c, h, Partition.of(h, [0, 0, 0, 0, 0], 2))
    dp = concatenate([a, b], 2, 3)
    assert dp.num_teleports == 2
    assert read_program(write_program(dp)) == dp
    check_program(dp)


@pytest.mark.parametrize(
    "text",
    ["", "dqc-dist v2\n", "dqc-dist v1\nqubits 1\nqpus 1\nbegin\nend\n", "dqc-dist v1\nqubits 1\nqpus 1\nalloc 0 0\nbegin\nfoo\nend\n"],
)
def test_read_program_errors(text):
    with pytest.raises(ProgramError):
        read_program(text)
