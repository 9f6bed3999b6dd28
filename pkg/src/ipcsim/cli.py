"""``ipcsim`` command line.

Exit codes: 0 clean run, 1 the scenario did not parse or validate, 2 a
runtime invariant was breached (leak check, flow error or counter mismatch)
and ``--strict`` was given.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .engine import seconds
from .network import Network
from .report import plot_latency, write_metrics
from .scenario import check_scenario

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ipcsim", description="Deterministic RINA network simulator")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("file", help="scenario YAML")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--until", type=float, metavar="SECONDS", help="override the stop time")
    r.add_argument("--trace", metavar="PATH", help="write the event trace here")
    r.add_argument("--metrics", metavar="PATH", help="write ping samples as CSV here")
    r.add_argument("--plot", metavar="PATH", help="render a latency figure (PNG/PDF/SVG)")
    r.add_argument("--validate-only", action="store_true", help="parse and validate, then stop")
    r.add_argument("--strict", action="store_true", help="exit 2 on leaks or flow errors")
    r.add_argument("--log-level", choices=sorted(LOG_LEVELS), default="warn")
    return p


def run_command(args, out=sys.stdout, err=sys.stderr) -> int:
    logging.basicConfig(level=LOG_LEVELS[args.log_level], format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return 1
    scenario, diags = check_scenario(text)
    if scenario is None:
        for d in diags:
            print(f"{args.file}: {d}", file=err)
        return 1
    if args.validate_only:
        print(f"{args.file}: ok ({len(scenario.nodes)} nodes, {len(scenario.links)} links, "
              f"{len(scenario.difs)} DIFs)", file=out)
        return 0
    if args.until is not None and args.until <= 0:
        print("error: --until must be positive", file=err)
        return 1
    net = Network(scenario, seed=args.seed)
    summary = net.run(seconds(args.until) if args.until is not None else None)
    if args.trace:
        net.tracer.write(args.trace)
    samples = net.samples()
    if args.metrics:
        write_metrics(samples, args.metrics)
    if args.plot:
        plot_latency(samples, args.plot, title=f"{scenario.name} (seed {net.seed})")
    print(summary.text(), file=out)
    if args.strict and not summary.clean:
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args)
    return 1


if __name__ == "__main__":
    sys.exit(main())
