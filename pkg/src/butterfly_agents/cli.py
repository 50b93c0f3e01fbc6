"""Command-line front end: run one protocol on one graph, or sweep sizes.

Exit codes: 0 success, 1 verification mismatch, 2 bad configuration or
unreadable input, 3 round budget exhausted.  Set BUTTERFLY_AGENTS_LOG to a
level name (DEBUG, INFO, ...) to get progress logging on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys

from .graphs import (
    Bipartition,
    GraphFormatError,
    PortGraph,
    load_graph,
    make_clique,
    make_complete_bipartite,
    make_path,
    make_random_connected_bipartite,
)
from .oracle import (
    NotBipartite,
    check_spanning_tree,
    oracle_coloring,
    oracle_per_node_butterflies,
    oracle_total_butterflies,
)
from .protocols.butterfly import count_butterflies
from .protocols.election import elect_leader_and_tree
from .protocols.known_leader import known_leader_tree
from .protocols.meeting import MeetingWindowProgram, window_length
from .runtime import (
    RoundLimitExceeded,
    RunReport,
    SimConfig,
    place_dispersed,
    run,
    write_trace_jsonl,
)

log = logging.getLogger("butterfly_agents")

PROTOCOLS = ("meeting-demo", "known-leader", "election", "butterfly-full")
SWEEP_PHASES = (
    "election",
    "downcast",
    "neighbor_scan_a",
    "wedge_count_a",
    "total_fold",
    "total_push",
    "neighbor_scan_b",
    "wedge_count_b",
)


class CliError(Exception):
    """Bad flags, bad generator parameters, unreadable files."""


# ---------------------------------------------------------------------------
# input assembly
# ---------------------------------------------------------------------------


def _build_graph(args) -> tuple[PortGraph, Bipartition | None]:
    if args.graph and args.gen:
        raise CliError("--graph and --gen are mutually exclusive")
    if args.graph:
        try:
            return load_graph(args.graph)
        except OSError as exc:
            raise CliError(f"cannot read {args.graph}: {exc}") from exc
        except GraphFormatError as exc:
            raise CliError(f"bad graph file {args.graph}: {exc}") from exc
    if not args.gen:
        raise CliError("one of --gen or --graph is required")
    name, *params = args.gen
    try:
        if name == "complete":
            a, b = map(int, params)
            return make_complete_bipartite(a, b)
        if name == "random":
            if len(params) == 2:
                a, b = map(int, params)
                prob = 0.3
            else:
                a, b = int(params[0]), int(params[1])
                prob = float(params[2])
            seed = args.seed if args.seed is not None else 0
            return make_random_connected_bipartite(a, b, prob, seed=seed)
        if name == "path":
            (k,) = map(int, params)
            return make_path(k)
        if name == "clique":
            (k,) = map(int, params)
            return make_clique(k), None
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad --gen {name} parameters {params}: {exc}") from exc
    raise CliError(f"unknown generator {name!r} (complete, random, path, clique)")


def _make_ids(spec: str, n: int, rng: random.Random) -> list[int]:
    if spec == "seq":
        return list(range(n))
    if spec == "rand":
        return rng.sample(range(2 * n), n)
    if spec.startswith("list:"):
        try:
            ids = [int(tok) for tok in spec[5:].split(",") if tok]
        except ValueError as exc:
            raise CliError(f"bad --ids list: {exc}") from exc
        if len(ids) != n:
            raise CliError(f"--ids list has {len(ids)} entries for {n} nodes")
        return ids
    raise CliError(f"--ids must be seq, rand, or list:... (got {spec!r})")


# ---------------------------------------------------------------------------
# verification against the centralized oracles
# ---------------------------------------------------------------------------


def diff_per_node(got: dict[int, int], want: dict[int, int]) -> list[str]:
    """Line-per-node mismatches between a counted and an expected mapping."""
    problems = []
    for key in sorted(set(got) | set(want)):
        g, w = got.get(key), want.get(key)
        if g != w:
            problems.append(f"node {key}: counted {g}, expected {w}")
    return problems


def _partition_problems(graph, home: dict[int, int], partition: dict[int, int],
                        leader_id: int) -> list[str]:
    try:
        side = oracle_coloring(graph)
    except NotBipartite:
        return []  # nothing to hold the 2-coloring against
    lead = side[home[leader_id]]
    return [
        f"agent {aid}: partition {got}, expected {0 if side[home[aid]] == lead else 1}"
        for aid, got in sorted(partition.items())
        if got != (0 if side[home[aid]] == lead else 1)
    ]


def _tree_problems(graph, tree) -> list[str]:
    chk = check_spanning_tree(
        graph, tree.node_parent_ports(), tree.home_node[tree.root_id]
    )
    return list(chk.problems)


def _payload_problems(graph, payload) -> list[str]:
    problems = []
    if payload.n != graph.node_count:
        problems.append(f"payload n={payload.n}, graph has {graph.node_count}")
    if payload.degree_sum != 2 * graph.edge_count:
        problems.append(
            f"payload degree_sum={payload.degree_sum}, graph has {2 * graph.edge_count}"
        )
    if payload.max_degree != graph.max_degree:
        problems.append(
            f"payload max_degree={payload.max_degree}, graph has {graph.max_degree}"
        )
    return problems


def _verify_butterfly(graph, res) -> list[str]:
    problems = []
    want_total = oracle_total_butterflies(graph)
    if res.total != want_total:
        problems.append(f"total {res.total}, oracle says {want_total}")
    home = res.election.tree.home_node
    got = {home[aid]: c for aid, c in res.per_node.items()}
    problems += diff_per_node(got, dict(enumerate(oracle_per_node_butterflies(graph))))
    part = res.election.partition
    half = (
        sum(c for aid, c in res.per_node.items() if part[aid] == 0),
        sum(c for aid, c in res.per_node.items() if part[aid] == 1),
    )
    if half != (2 * res.total, 2 * res.total):
        problems.append(f"side sums {half} != twice the total {2 * res.total}")
    return problems


# ---------------------------------------------------------------------------
# the run command
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    graph, _bip = _build_graph(args)
    n = graph.node_count
    rng = random.Random(args.seed)
    ids = _make_ids(args.ids, n, rng)
    try:
        config = place_dispersed(graph, ids, lam=args.lam)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    log.info(
        "graph: n=%d m=%d max_degree=%d; protocol %s, ids %s",
        n, graph.edge_count, graph.max_degree, args.protocol, args.ids,
    )

    trace = None
    problems: list[str] = []

    if args.protocol == "meeting-demo":
        targets = {s.id: (0 if graph.degree(s.home_node) > 0 else None)
                   for s in config.states}
        program = MeetingWindowProgram(lam=config.lam, targets=targets)
        result = run(
            graph, config, program,
            max_rounds=args.max_rounds, record_trace=args.trace is not None,
        )
        trace = result.trace
        report = RunReport(
            rounds_total=result.rounds,
            rounds_per_phase={"meeting": result.rounds},
            peak_memory_bits=result.peak_bits,
            outputs={
                "window_rounds": window_length(config.lam),
                "meetings": [list(m) for m in program.meetings],
            },
        )
        if args.verify:
            at_node = {s.home_node: s.id for s in config.states}
            met = {(u, v) for _, u, v in program.meetings}
            for s in config.states:
                if graph.degree(s.home_node) == 0:
                    continue
                other = at_node[graph.neighbor_via(s.home_node, 0)[0]]
                if (s.id, other) not in met:
                    problems.append(f"agent {s.id} never met agent {other} across port 0")
    elif args.protocol == "known-leader":
        leader = args.leader if args.leader is not None else min(ids)
        if leader not in set(ids):
            raise CliError(f"--leader {leader} is not among the agent ids")
        res = known_leader_tree(
            graph, config, leader,
            max_rounds=args.max_rounds, record_trace=args.trace is not None,
        )
        report, trace = res.report, res.trace
        if args.verify:
            problems += _tree_problems(graph, res.tree)
            problems += _partition_problems(graph, res.tree.home_node, res.partition, leader)
            problems += _payload_problems(graph, res.payload)
            budget = 4 * n
            spent = res.report.rounds_per_phase["assignment"]
            if spent > budget:
                problems.append(f"assignment took {spent} rounds, budget {budget}")
    elif args.protocol == "election":
        res = elect_leader_and_tree(
            graph, config,
            max_rounds=args.max_rounds, record_trace=args.trace is not None,
        )
        report, trace = res.report, res.trace
        if args.verify:
            if res.leader_id != min(ids):
                problems.append(f"leader {res.leader_id}, smallest id is {min(ids)}")
            problems += _tree_problems(graph, res.tree)
            problems += _partition_problems(
                graph, res.tree.home_node, res.partition, res.leader_id
            )
            problems += _payload_problems(graph, res.payload)
    elif args.protocol == "butterfly-full":
        res = count_butterflies(
            graph, config,
            max_rounds=args.max_rounds, record_trace=args.trace is not None,
        )
        report, trace = res.report, res.trace
        if args.verify:
            problems += _verify_butterfly(graph, res)
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown protocol {args.protocol}")

    if args.trace:
        write_trace_jsonl(args.trace, trace or [])
        log.info("trace written to %s", args.trace)
    if args.report:
        payload = json.loads(report.to_json())
        if args.protocol == "butterfly-full":
            # counting runs also carry their results at the top level
            payload["total"] = res.total
            payload["per_node"] = {str(a): c for a, c in sorted(res.per_node.items())}
            payload["rounds"] = dict(report.rounds_per_phase)
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        log.info("report written to %s", args.report)

    print(f"protocol:    {args.protocol}")
    print(f"rounds:      {report.rounds_total}  {report.rounds_per_phase}")
    print(f"peak memory: {max(report.peak_memory_bits.values())} bits/agent")
    for key, value in report.outputs.items():
        text = str(value)
        print(f"{key}: {text if len(text) <= 120 else text[:117] + '...'}")
    if args.verify:
        if problems:
            for p in problems:
                print(f"VERIFY FAIL: {p}", file=sys.stderr)
            return 1
        print("verify:      ok")
    return 0


# ---------------------------------------------------------------------------
# the sweep command
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    rng = random.Random(args.seed)
    sizes = []
    for token in args.sizes:
        try:
            a, b = token.lower().split("x")
            sizes.append((int(a), int(b)))
        except ValueError as exc:
            raise CliError(f"bad --sizes entry {token!r}, want AxB") from exc

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out)
        writer.writerow(
            ["n", "max_degree", "min_side", "id_width", "status", "rounds_total"]
            + list(SWEEP_PHASES)
            + ["peak_bits"]
        )
        for a, b in sizes:
            g, _ = make_random_connected_bipartite(
                a, b, args.edge_prob, seed=rng.randint(0, 2**31)
            )
            n = g.node_count
            ids = rng.sample(range(2 * n), n)
            config = place_dispersed(g, ids)
            lw = max(config.lam.bit_length(), 1)
            base = [n, g.max_degree, min(a, b), lw]
            try:
                res = count_butterflies(g, config, max_rounds=args.max_rounds)
            except Exception as exc:  # a failed point must not kill the sweep
                log.warning("sweep point %dx%d failed: %s", a, b, exc)
                writer.writerow(
                    base + [f"failed:{type(exc).__name__}", ""]
                    + [""] * len(SWEEP_PHASES) + [""]
                )
                continue
            rp = res.report.rounds_per_phase
            writer.writerow(
                base
                + ["ok", res.report.rounds_total]
                + [rp.get(p, 0) for p in SWEEP_PHASES]
                + [max(res.report.peak_memory_bits.values())]
            )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="butterfly-agents",
        description="Mobile-agent protocols on anonymous port-labeled graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one protocol on one graph")
    p_run.add_argument("--gen", nargs="+", metavar="ARG",
                       help="generate a graph: complete A B | random A B [PROB] | path K | clique K")
    p_run.add_argument("--graph", help="load a graph file instead of generating")
    p_run.add_argument("--ids", default="rand",
                       help="agent ids: seq | rand | list:3,1,4 (default rand)")
    p_run.add_argument("--seed", type=int, default=None, help="RNG seed for rand ids / random gen")
    p_run.add_argument("--lam", type=int, default=None,
                       help="declared id bound (default: the largest id)")
    p_run.add_argument("--protocol", choices=PROTOCOLS, default="butterfly-full")
    p_run.add_argument("--leader", type=int, default=None,
                       help="leader id for known-leader (default: smallest id)")
    p_run.add_argument("--verify", action="store_true",
                       help="check the outcome against the centralized oracles")
    p_run.add_argument("--trace", metavar="PATH", help="write a JSONL movement trace")
    p_run.add_argument("--report", metavar="PATH", help="write the run report as JSON")
    p_run.add_argument("--max-rounds", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="CSV of rounds/memory across graph sizes")
    p_sweep.add_argument("--sizes", nargs="+", default=["4x4", "8x8", "16x16", "32x32"],
                         metavar="AxB")
    p_sweep.add_argument("--edge-prob", type=float, default=0.3)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out", default="-", help="CSV path, or - for stdout")
    p_sweep.add_argument("--max-rounds", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("BUTTERFLY_AGENTS_LOG")
    if level:
        logging.basicConfig(
            level=getattr(logging, level.upper(), logging.INFO),
            format="%(levelname)s %(name)s: %(message)s",
        )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RoundLimitExceeded as exc:
        print(f"round limit: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
