import itertools
import math

import numpy as np
import pytest

from hyperdist.circuit import Circuit, gate, parse_circuit
from hyperdist.distributor import DistributedProgram, Teleport, distribute
from hyperdist.hypergraph import Partition, build_hypergraph
from hyperdist.verifier import (
    SimulationError,
    all_branches,
    assert_equiv,
    basis_state,
    branches,
    count_measurements,
    dump_amplitudes,
    fidelity,
    random_state,
    simulate_circuit,
    simulate_distributed,
)

from _fixtures import fig1, fig5_partition_labels


def test_h_on_zero():
    out = simulate_circuit(parse_circuit("qubits 1\nh 0"))
    assert np.allclose(out, [1 / math.sqrt(2), 1 / math.sqrt(2)])


def test_cz_on_one_one():
    out = simulate_circuit(parse_circuit("qubits 2\ncz 0 1"), 0b11)
    assert np.allclose(out, -basis_state(2, 3))


def test_ccz_phases():
    c = parse_circuit("qubits 3\nccz 0 1 2")
    for i in range(8):
        assert np.allclose(simulate_circuit(c, i), (-1 if i == 7 else 1) * basis_state(3, i))


def test_x_on_wire_zero_is_low_bit():
    assert np.allclose(simulate_circuit(parse_circuit("qubits 3\nx 0")), basis_state(3, 1))


def test_swap_and_ccx_expand():
    assert np.allclose(simulate_circuit(parse_circuit("qubits 2\nswap 0 1"), 0b01), basis_state(2, 0b10))
    assert np.allclose(simulate_circuit(parse_circuit("qubits 3\nccx 0 1 2"), 0b011), basis_state(3, 0b111))


def test_input_not_modified():
    v = random_state(3, np.random.default_rng(0))
    keep = v.copy()
    simulate_circuit(parse_circuit("qubits 3\nz 0\ncz 1 2"), v)
    assert np.array_equal(v, keep)


def _fig2_program():
    c = parse_circuit("qubits 3\ncz 1 2\ncz 0 1")
    h = build_hypergraph(c)
    return c, distribute(c, h, Partition.of(h, [1, 0, 1, 1, 1], 2))


def test_fig2_every_branch():
    c, dp = _fig2_program()
    plus = np.array([1, 1]) / math.sqrt(2)
    one = np.array([0, 1])
    # wire 0 is the least significant tensor factor
    state = np.kron(one, np.kron(one, plus))
    expected = simulate_circuit(c, state)
    assert count_measurements(dp) == 2
    for branch in itertools.product((0, 1), repeat=2):
        assert fidelity(simulate_distributed(dp, state, branch), expected) >= 1 - 1e-10


def test_zero_ebit_program():
    c, h = fig1()
    dp = distribute(c, h, Partition.of(h, [0] * 9, 1))
    v = random_state(4, np.random.default_rng(2))
    assert np.allclose(simulate_distributed(dp, v, ()), simulate_circuit(c, v))


def test_teleport_identity():
    dp = DistributedProgram(2, 1, (0,), (Teleport(0, 0, 1),), 1, 2)
    psi = random_state(1, np.random.default_rng(5))
    for branch in itertools.product((0, 1), repeat=2):
        assert fidelity(simulate_distributed(dp, psi, branch), psi) >= 1 - 1e-12


def test_fig5_all_branches_agree():
    c, h = fig1()
    dp = distribute(c, h, Partition.of(h, fig5_partition_labels(), 2))
    v = random_state(4, np.random.default_rng(8))
    outs = [simulate_distributed(dp, v, b) for b in branches(dp)]
    assert len(outs) == 2 ** count_measurements(dp)
    for out in outs:
        assert abs(np.linalg.norm(out) - 1) < 1e-10
        assert assert_equiv(out, outs[0], 1e-10)
    assert assert_equiv(outs[0], simulate_circuit(c, v))


def test_branch_tree_matches_per_branch_runs():
    c, h = fig1()
    dp = distribute(c, h, Partition.of(h, fig5_partition_labels(), 2))
    v = random_state(4, np.random.default_rng(3))
    walked = list(all_branches(dp, v))
    assert [b for b, _ in walked] == list(branches(dp))
    for b, out in walked:
        assert np.allclose(out, simulate_distributed(dp, v, b))


def test_sampled_branches():
    c, h = fig1()
    dp = distribute(c, h, Partition.of(h, fig5_partition_labels(), 2))
    sampled = list(branches(dp, max_exhaustive=1, samples=5, seed=1))
    assert len(sampled) == 5 and all(len(b) == count_measurements(dp) for b in sampled)
    v = random_state(4, np.random.default_rng(1))
    assert assert_equiv(simulate_distributed(dp, v, 7), simulate_circuit(c, v))


def test_branch_length_checked():
    _, dp = _fig2_program()
    with pytest.raises(SimulationError):
        simulate_distributed(dp, None, (0,))


def test_size_guard():
    with pytest.raises(SimulationError):
        simulate_circuit(Circuit(23, (gate("h", 0),)))


def test_input_shape_checked():
    with pytest.raises(SimulationError):
        simulate_circuit(Circuit(2), np.ones(3))


def test_equivalence_up_to_phase():
    v = random_state(3, np.random.default_rng(4))
    assert assert_equiv(v, v)
    assert assert_equiv(v, np.exp(0.7j) * v)
    assert not assert_equiv(basis_state(1, 0), basis_state(1, 1))
    with pytest.raises(SimulationError):
        assert_equiv(basis_state(1), basis_state(2))


def test_dump_amplitudes():
    lines = dump_amplitudes(np.array([1, 1j]) / math.sqrt(2)).splitlines()
    assert len(lines) == 2
    idx, re, im = lines[1].split()
    assert idx == "1" and float(re) == 0 and float(im) == pytest.approx(1 / math.sqrt(2))
