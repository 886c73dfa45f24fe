"""Distribute quantum circuits over several QPUs by hypergraph partitioning."""

from .circuit import (
    Circuit,
    CircuitError,
    Gate,
    gate,
    gen_qft,
    gen_random,
    gen_random_cz,
    parse_circuit,
    pull_czs_early,
    rewrite_to_cz_gateset,
    serialize_circuit,
)
from .distributor import (
    DistributedProgram,
    ProgramError,
    check_program,
    distribute,
    ebit_stats,
    graph_baseline_distribute,
    read_program,
    write_program,
)
from .hypergraph import Hypergraph, HypergraphError, Partition, build_hypergraph, cut_count
from .partitioner import InfeasibleBalanceError, PartitionerConfig, brute_force_partition, partition_multilevel
from .segmentation import SegmentConfig, SegmentPlan, discrepancy, distribute_segmented, plan_segments
from .verifier import simulate_circuit, simulate_distributed

__version__ = "0.1.0"
