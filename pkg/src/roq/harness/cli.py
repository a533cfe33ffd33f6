"""``roq`` command line entry point.

Exit codes: 0 success, 1 invalid input, 2 the run hit its time cap (partial
results were still written).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigErrors, ExperimentConfig, load_config, shipped_config
from .experiments import (
    ExperimentError,
    mesh_config,
    run_bgp_experiment,
    run_ospf_experiment,
)
from .report import ReportError, compare, emit_report
from .rib_io import BadAsNumber, BadPrefix, generate_rib, write_rib

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2
TRACE = 5
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG, "trace": TRACE}

log = logging.getLogger("roq")


def setup_logging() -> None:
    logging.addLevelName(TRACE, "TRACE")
    name = os.environ.get("ROQ_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if name and name not in LOG_LEVELS:
        log.warning("unknown ROQ_LOG level %r, using warn", name)


def _default_out(cfg: ExperimentConfig, label: str) -> Path:
    return cfg.out if cfg.out is not None else Path("results") / label


def execute(cfg: ExperimentConfig, out: Path, stream=None) -> int:
    stream = stream or sys.stdout
    if cfg.protocol == "bgp":
        run = run_bgp_experiment(cfg)
        emit_report(run.records, out)
        lat = run.latencies()
        print(f"bgp {cfg.transport}: {len(run.records)} prefixes, {run.missing} missing, "
              f"median latency {_median(lat)} us, stop={run.reason}", file=stream)
        if run.loop_violations:
            print(f"loop violations: {run.loop_violations}", file=stream)
        print(f"report written to {out}", file=stream)
        return EXIT_PARTIAL if run.partial else EXIT_OK
    run = run_ospf_experiment(cfg)
    emit_report(run.events, out)
    print(f"ospf {run.mode}: cold start {_secs(run.cold_start_us)}, "
          f"reconvergence {_secs(run.reconvergence_us)}, stop={run.reason}", file=stream)
    print(f"report written to {out}", file=stream)
    return EXIT_PARTIAL if run.partial else EXIT_OK


def _median(values) -> str:
    if not values:
        return "n/a"
    s = sorted(values)
    mid = len(s) // 2
    return str(s[mid] if len(s) % 2 else (s[mid - 1] + s[mid]) / 2)


def _secs(us) -> str:
    return "n/a" if us is None else f"{us / 1e6:.6f} s"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed)
    out = Path(args.out) if args.out else _default_out(cfg, Path(args.config).stem)
    return execute(cfg, out)


def cmd_bench(args) -> int:
    if args.scenario == "bgp-triangle":
        cfg = load_config(shipped_config("bgp-triangle.conf"))
        transport = {"tcp": "tcp-like", "tcp-like": "tcp-like", "quic": "quic"}[args.transport]
        rib = cfg.rib.__class__(generate=args.routes)
        cfg = cfg.with_overrides(transport=transport, rib=rib, seed=args.seed)
        label = f"bgp-triangle-{args.transport}"
    else:
        if args.delegate_acks and args.mode != "quic":
            print("error: --delegate-acks requires --mode quic", file=sys.stderr)
            return EXIT_INVALID
        if args.nodes < 2:
            print("error: --nodes must be at least 2", file=sys.stderr)
            return EXIT_INVALID
        base = load_config(shipped_config("ospf-mesh.conf"))
        cfg = mesh_config(args.nodes, "quic" if args.mode == "quic" else "tcp-like",
                          args.delegate_acks, base.seed if args.seed is None else args.seed,
                          base.links[0].spec.one_way_delay_ms, base.links[0].spec.loss_rate,
                          base.time_cap)
        label = f"ospf-mesh-{args.mode}" + ("-delegate" if args.delegate_acks else "")
    out = Path(args.out) if args.out else Path("results") / label
    return execute(cfg, out)


def cmd_gen_rib(args) -> int:
    if args.count < 1:
        print("error: --count must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    routes = generate_rib(args.count, args.seed)
    write_rib(routes, args.out)
    c = routes.counts
    print(f"wrote {len(routes)} routes ({c[4]} IPv4, {c[6]} IPv6) to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = compare(args.dir_a, args.dir_b)
    if not rows:
        print("no common metrics", file=sys.stderr)
        return EXIT_INVALID
    print(f"{'metric':<28}{'A':>16}{'B':>16}{'B/A':>10}")
    for key, a, b, ratio in rows:
        r = "n/a" if ratio is None else f"{ratio:.3f}"
        print(f"{key:<28}{a:>16.1f}{b:>16.1f}{r:>10}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roq", description="Routing-over-secure-transport experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.set_defaults(fn=cmd_run)

    bench = sub.add_parser("bench", help="run a built-in scenario")
    bsub = bench.add_subparsers(dest="scenario", required=True)
    tri = bsub.add_parser("bgp-triangle")
    tri.add_argument("--transport", choices=["tcp", "tcp-like", "quic"], required=True)
    tri.add_argument("--routes", type=int, default=10_000)
    tri.add_argument("--seed", type=int)
    tri.add_argument("--out")
    tri.set_defaults(fn=cmd_bench)
    mesh = bsub.add_parser("ospf-mesh")
    mesh.add_argument("--mode", choices=["native", "quic"], required=True)
    mesh.add_argument("--delegate-acks", action="store_true")
    mesh.add_argument("--nodes", type=int, default=6)
    mesh.add_argument("--seed", type=int)
    mesh.add_argument("--out")
    mesh.set_defaults(fn=cmd_bench)

    gen = sub.add_parser("gen-rib", help="write a synthetic route table")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(fn=cmd_gen_rib)

    cmp_ = sub.add_parser("compare", help="ratio summary of two report directories")
    cmp_.add_argument("dir_a")
    cmp_.add_argument("dir_b")
    cmp_.set_defaults(fn=cmd_compare)
    return p


def main(argv=None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except ConfigErrors as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (BadPrefix, BadAsNumber) as exc:
        print(f"rib error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ExperimentError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
