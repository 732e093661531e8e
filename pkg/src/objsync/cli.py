"""Command line entry point.

Subcommands::

    objsync serve <config>                 run a real TCP node from a config file
    objsync bench-latency [options]        median latency table as CSV
    objsync bench-versions [options]       version-count census as CSV
    objsync dump-graph <node> <type>       DOT dump of a node's graph after a
                                           short seeded scenario
"""

from __future__ import annotations

import argparse
import sys
import time

from .config import build_dataframe, parse_node_config
from .errors import ConfigError, ObjSyncError
from .transport import TCPTransport, serve
from .workload import Scenario, ScenarioConfig, latency_table, run_version_census


def _cmd_serve(args) -> int:
    cfg = parse_node_config(args.config)
    if cfg.listen is None:
        print("config has no 'listen' address", file=sys.stderr)
        return 2
    host, _, port = cfg.listen.rpartition(":")
    df = build_dataframe(cfg, transport=TCPTransport())
    server = serve(df, host or "127.0.0.1", int(port))
    print(f"{cfg.name} serving {','.join(df.subscribed_types())} on {server.address}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.close()
    return 0


def _cmd_bench_latency(args) -> int:
    counts = [int(c) for c in args.asteroids.split(",")]
    csv = latency_table(
        counts,
        rtt_ms=args.rtt,
        conflicts=args.conflicts,
        duration_ms=args.duration * 1000.0,
        seed=args.seed,
    )
    _emit(csv, args.out)
    return 0


def _cmd_bench_versions(args) -> int:
    metrics = run_version_census(
        n_actors=args.actors,
        producer_commits=args.commits,
        gc_enabled=not args.no_gc,
        seed=args.seed,
    )
    _emit(metrics.census_csv(), args.out)
    return 0


def _cmd_dump_graph(args) -> int:
    scenario = Scenario(
        ScenarioConfig(
            asteroid_count=args.asteroids,
            duration_ms=args.duration * 1000.0,
            seed=args.seed,
        )
    )
    scenario.run()
    df = scenario.dataframes.get(args.node)
    if df is None:
        print(f"no node named {args.node!r}; have {sorted(scenario.dataframes)}", file=sys.stderr)
        return 2
    graph = df.graphs.get(args.type)
    if graph is None:
        print(f"{args.node} does not track {args.type!r}", file=sys.stderr)
        return 2
    _emit(graph.to_dot() + "\n", args.out)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="objsync", description="replicated-object sync benchmarks and nodes"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run a TCP node from a config file")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("bench-latency", help="median latencies per role and operation")
    p.add_argument("--asteroids", default="20", help="comma-separated state sizes")
    p.add_argument("--rtt", type=float, default=72.0, help="round-trip time in ms")
    p.add_argument("--conflicts", action="store_true", help="observers commit predictions")
    p.add_argument("--duration", type=float, default=30.0, help="simulated seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bench_latency)

    p = sub.add_parser("bench-versions", help="vertex-count census at the producer")
    p.add_argument("--actors", type=int, default=1)
    p.add_argument("--commits", type=int, default=2000, help="producer commits to simulate")
    p.add_argument("--no-gc", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bench_versions)

    p = sub.add_parser("dump-graph", help="DOT dump of a node's version graph")
    p.add_argument("node", help="node name, e.g. producer or actor0")
    p.add_argument("type", help="type name, e.g. Asteroid")
    p.add_argument("--asteroids", type=int, default=5)
    p.add_argument("--duration", type=float, default=2.0, help="simulated seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_dump_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ObjSyncError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
