"""Command-line driver: circuit file in, distributed program and JSON report out."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .circuit import CircuitError, gen_qft, gen_random, parse_circuit, pull_czs_early, rewrite_to_cz_gateset, serialize_circuit
from .distributor import ProgramError, check_program, distribute, ebit_stats, graph_baseline_distribute, write_program
from .hypergraph import HypergraphError, balance_ok, build_hypergraph, write_hgr, write_partition_file
from .partitioner import InfeasibleBalanceError, PartitionerConfig, import_partition, partition_multilevel
from .segmentation import DEFAULT_SEGMENT_WINDOW, SegmentConfig, distribute_segmented, plan_segments, plan_summary
from .verifier import SimulationError, check_program_equivalence, random_state

REPORT_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_BALANCE, EXIT_VERIFY = 0, 2, 3, 4, 5

log = logging.getLogger("hyperdist")


class VerificationError(RuntimeError):
    pass


def _segment_mode(text: str):
    if text in ("off", "auto"):
        return text, None
    if text.startswith("thresh="):
        try:
            return "threshold", float(text.split("=", 1)[1])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected off, auto or thresh=DELTA, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _non_negative_float(text: str) -> float:
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperdist", description="Distribute a quantum circuit over k QPUs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="distribute a circuit file")
    run.add_argument("input", help="circuit in DQC v1 text format")
    run.add_argument("--k", type=_positive_int, default=2, help="number of QPUs")
    run.add_argument("--epsilon", type=_non_negative_float, default=0.03, help="imbalance tolerance")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--restarts", type=_positive_int, default=8, help="initial partitions tried")
    run.add_argument("--ccz-native", action="store_true", help="keep CCZ gates instead of decomposing them")
    run.add_argument("--window", type=int, default=None, help="split hyperedges whose gates are further apart")
    run.add_argument("--segment", type=_segment_mode, default=("off", None), help="off, auto or thresh=DELTA")
    run.add_argument("--segment-window", type=_positive_int, default=DEFAULT_SEGMENT_WINDOW)
    run.add_argument("--no-align", action="store_true", help="compare segment labels without matching blocks")
    run.add_argument("--baseline", action="store_true", help="also report the wire-graph baseline")
    run.add_argument("--verify", action="store_true", help="check equivalence by simulation")
    run.add_argument("--verify-max-wires", type=_positive_int, default=10)
    run.add_argument("--emit-hgr", action="store_true", help="write the hypergraph in hMETIS format")
    run.add_argument("--import-partition", metavar="FILE", help="use an external partition of the hypergraph")
    run.add_argument("--out", metavar="DIR", help="output directory (report goes to stdout otherwise)")

    gen = sub.add_parser("gen", help="write a benchmark circuit")
    gen.add_argument("family", choices=["qft", "random"])
    gen.add_argument("wires", type=_positive_int)
    gen.add_argument("--gates", type=_positive_int, default=100, help="gate count for random circuits")
    gen.add_argument("--ccz-fraction", type=float, default=0.0)
    gen.add_argument("--swaps", action="store_true", help="append the QFT's final swaps")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", help="file to write (stdout otherwise)")
    return ap


def _verify(dp, c, seed: int, max_wires: int) -> str:
    if c.num_wires > max_wires:
        return "SKIPPED"
    state = random_state(c.num_wires, np.random.default_rng(seed))
    try:
        ok = check_program_equivalence(dp, c, state)
    except SimulationError as exc:
        log.warning("verification skipped: %s", exc)
        return "SKIPPED"
    return "PASS" if ok else "FAIL"


def run_pipeline(args) -> tuple[dict, dict]:
    """Execute the pipeline; return the report and the text artifacts to write."""
    started = time.perf_counter()
    path = Path(args.input)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CircuitError(f"cannot read {path}: {exc.strerror}") from None
    source = parse_circuit(text, name=path.stem)
    c = pull_czs_early(rewrite_to_cz_gateset(source, ccz_native=args.ccz_native))
    mode, threshold = args.segment
    artifacts = {}
    report: dict = {
        "report_version": REPORT_VERSION,
        "input": path.name,
        "config": {
            "k": args.k,
            "epsilon": args.epsilon,
            "seed": args.seed,
            "ccz_native": args.ccz_native,
            "window": args.window,
            "segment": mode if threshold is None else f"thresh={threshold}",
            "segment_window": args.segment_window,
        },
        "circuit": {
            "num_wires": c.num_wires,
            "num_gates": len(c.gates),
            "num_cz": c.count("cz"),
            "num_ccz": c.count("ccz"),
        },
    }
    pcfg = PartitionerConfig(k=args.k, epsilon=args.epsilon, seed=args.seed, restarts=args.restarts)

    if mode == "off":
        h = build_hypergraph(c, window=args.window)
        if args.import_partition:
            try:
                ptext = Path(args.import_partition).read_text()
            except OSError as exc:
                raise CircuitError(f"cannot read {args.import_partition}: {exc.strerror}") from None
            p = import_partition(h, ptext, args.k, args.epsilon)
        else:
            p = partition_multilevel(h, pcfg)
        dp = distribute(c, h, p)
        cuts = p.cut_count
        report["balance_ok"] = balance_ok(h, p)
        report["segments"] = [{"gate_range": [0, len(c.gates)], "cut_count": cuts, "hedges": len(h.hyperedges)}]
        report["teleports"] = 0
        if args.emit_hgr:
            artifacts["hypergraph.hgr"] = write_hgr(h)
            artifacts["partition.txt"] = write_partition_file(p)
    else:
        if args.import_partition:
            raise HypergraphError("--import-partition cannot be combined with segmentation")
        scfg = SegmentConfig(
            k=args.k,
            epsilon=args.epsilon,
            seed=args.seed,
            window=args.window,
            segment_window=args.segment_window,
            mode=mode,
            threshold=threshold if threshold is not None else SegmentConfig.threshold,
            align=not args.no_align,
            restarts=args.restarts,
        )
        plan = plan_segments(c, scfg)
        dp = distribute_segmented(plan, c)
        cuts = sum(s.cut_count for s in plan.segments)
        summary = plan_summary(plan, scfg.align)
        report["balance_ok"] = all(balance_ok(s.hypergraph, s.partition) for s in plan.segments)
        report["segments"] = summary["segments"]
        report["discrepancy"] = summary["discrepancy"]
        report["teleports"] = len(plan.teleports)
        if args.emit_hgr:
            for i, s in enumerate(plan.segments):
                artifacts[f"segment{i}.hgr"] = write_hgr(s.hypergraph)
                artifacts[f"segment{i}.part"] = write_partition_file(s.partition)

    check_program(dp, c)
    if dp.ebit_count != cuts + dp.num_teleports:
        raise ProgramError(f"ebit count {dp.ebit_count} differs from cuts {cuts} plus teleports {dp.num_teleports}")
    stats = ebit_stats(dp, c)
    report.update({key: stats[key] for key in ("ebit_count", "ebits_per_cz", "ebit_peak", "overhead", "per_qpu_wires")})
    report["cut_count"] = cuts

    if args.baseline:
        base = graph_baseline_distribute(c, args.k, args.epsilon, args.seed, restarts=args.restarts)
        saved = base.ebit_count - dp.ebit_count
        report["baseline"] = {
            "ebit_count": base.ebit_count,
            "ebits_per_cz": ebit_stats(base, c)["ebits_per_cz"],
            "ebits_saved": saved,
            "saving_pct": 100.0 * saved / base.ebit_count if base.ebit_count else 0.0,
        }
    if args.verify:
        report["equivalence"] = _verify(dp, c, args.seed, args.verify_max_wires)

    artifacts["program.dqcd"] = write_program(dp)
    report["wall_time_s"] = round(time.perf_counter() - started, 3)
    return report, artifacts


def _cmd_run(args) -> int:
    try:
        report, artifacts = run_pipeline(args)
    except InfeasibleBalanceError as exc:
        print(f"hyperdist: partitioner: {exc}", file=sys.stderr)
        return EXIT_BALANCE
    except (CircuitError, HypergraphError, ProgramError) as exc:
        module = {CircuitError: "circuit", HypergraphError: "hypergraph", ProgramError: "distributor"}
        tag = next(v for k, v in module.items() if isinstance(exc, k))
        print(f"hyperdist: {tag}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    body = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in artifacts.items():
            (out / name).write_text(text)
        (out / "report.json").write_text(body)
    sys.stdout.write(body)
    if report.get("equivalence") == "FAIL":
        print("hyperdist: verifier: equivalence: FAIL", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.family == "qft":
        c = gen_qft(args.wires, swaps=args.swaps)
    else:
        c = gen_random(args.wires, args.gates, ccz_fraction=args.ccz_fraction, seed=args.seed)
    text = serialize_circuit(c)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_gen(args)


if __name__ == "__main__":
    sys.exit(main())
