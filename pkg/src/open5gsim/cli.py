"""Command-line entry point.

    open5g-sim run <scenario> -o <trace>
    open5g-sim verify <trace> --golden <file> [--channels srb0,srb1,ngap,open5g]
    open5g-sim table <scenario> --node <name> --at <step>

Exit codes: 0 ok, 1 verification mismatch, 2 parse error, 3 simulation error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import SimulationError
from .netsim import Simulator
from .scenario import ParseError, load_scenario
from .trace import TraceParseError, read_trace, write_trace

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_PARSE_ERROR = 2
EXIT_SIM_ERROR = 3


def cmd_run(scenario_path: str, out_path: str) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    try:
        trace = Simulator(scenario.topology, list(scenario.script), scenario.settings).run()
    except SimulationError as exc:
        print(f"simulation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIM_ERROR
    write_trace(out_path, trace)
    print(f"wrote {len(trace.records)} trace records to {out_path}")
    return EXIT_OK


def cmd_verify(trace_path: str, golden_path: str, channels: set[str] | None = None) -> int:
    try:
        trace = read_trace(trace_path)
        golden = read_trace(golden_path)
    except (TraceParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    got = trace.signature(channels)
    want = golden.signature(channels)
    for i, (g, w) in enumerate(zip(got, want), start=1):
        if g != w:
            print(f"divergence at step {i}: got {g}, want {w}")
            return EXIT_MISMATCH
    if len(got) != len(want):
        i = min(len(got), len(want)) + 1
        print(f"divergence at step {i}: got {len(got)} records, want {len(want)}")
        return EXIT_MISMATCH
    print(f"traces match ({len(got)} records)")
    return EXIT_OK


def cmd_table_dump(scenario_path: str, node: str, at_step: int) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    if node not in {n.name for n in scenario.topology.nodes}:
        print(f"unknown node {node!r}", file=sys.stderr)
        return EXIT_SIM_ERROR
    try:
        sim = Simulator(scenario.topology, list(scenario.script), scenario.settings)
        sim.run()
    except SimulationError as exc:
        print(f"simulation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIM_ERROR
    for row in sim.table_at_step(node, at_step):
        print(row)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="open5g-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its trace")
    p_run.add_argument("scenario")
    p_run.add_argument("-o", "--out", required=True)

    p_verify = sub.add_parser("verify", help="compare a trace against a golden")
    p_verify.add_argument("trace")
    p_verify.add_argument("--golden", required=True)
    p_verify.add_argument("--channels", default=None, help="comma-separated channel filter")

    p_table = sub.add_parser("table", help="dump a node's flow table at a trace step")
    p_table.add_argument("scenario")
    p_table.add_argument("--node", required=True)
    p_table.add_argument("--at", type=int, required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.scenario, args.out)
    if args.command == "verify":
        channels = None
        if args.channels:
            channels = {c.strip().upper() for c in args.channels.split(",")}
        return cmd_verify(args.trace, args.golden, channels)
    return cmd_table_dump(args.scenario, args.node, args.at)


if __name__ == "__main__":
    sys.exit(main())
