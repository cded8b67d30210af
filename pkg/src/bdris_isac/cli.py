"""Command line entry point.

    bdris-isac run --config FILE [--out PATH] [--format csv|jsonl] [--workers N] [--seed-offset N] [--timing]
    bdris-isac normalize --config FILE
    bdris-isac check

Exit status: 0 success, 1 configuration error, 2 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .ao import compute_normalizers
from .geometry import make_scenario
from .sweep import ConfigError, emit, load_config, point_config, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("bdris_isac")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bdris-isac", description="AO-PSCA joint design for BD-RIS ISAC transmitters")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a Monte Carlo sweep and emit one row per point x seed x topology")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="-", help="output path, '-' for stdout (default)")
    r.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed-offset", type=int, default=0)
    r.add_argument("--timing", action="store_true", help="fill the wall_ms column (output is then not reproducible)")

    n = sub.add_parser("normalize", help="print V_c and V_s for every sweep point and seed")
    n.add_argument("--config", required=True)
    n.add_argument("--seed-offset", type=int, default=0)

    c = sub.add_parser("check", help="run the oracle/invariant self-test on a small instance")
    c.add_argument("--seed", type=int, default=0)
    return ap


def _cmd_run(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg, spec, settings = load_config(args.config)
    spec = spec.with_seed_offset(args.seed_offset)
    rows = run_sweep(cfg, spec, settings, workers=args.workers, timing=args.timing)
    emit(rows, args.format, args.out)
    failed = [r for r in rows if r.error]
    for r in failed:
        log.error("%s=%s seed=%d topology=%s: %s", r.axis, r.point, r.seed, r.topology, r.error)
    return EXIT_NUMERIC if any(r.numerical_abort for r in failed) else EXIT_OK


def _cmd_normalize(args) -> int:
    cfg, spec, settings = load_config(args.config)
    spec = spec.with_seed_offset(args.seed_offset)
    topo = spec.normalizer_topology if spec.normalizer_topology != "same" else cfg.topology
    print(f"{spec.axis},seed,topology,vc,vs")
    for value in spec.values:
        pcfg = replace(point_config(cfg, spec.axis, value), topology=topo)
        for seed in spec.seeds:
            norm = compute_normalizers(make_scenario(pcfg, seed), settings)
            print(f"{value},{seed},{topo},{norm.vc!r},{norm.vs!r}")
    return EXIT_OK


def _cmd_check(args) -> int:
    from .selfcheck import run_checks

    results = run_checks(args.seed)
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_NUMERIC


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "normalize": _cmd_normalize, "check": _cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
