"""Command-line front end: ``twrelay run`` and ``twrelay doctor``."""

import argparse
import logging
import sys

from . import harness

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


def _parser():
    p = argparse.ArgumentParser(prog="twrelay",
                                description="Two-way MIMO relay transceiver design simulator.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo sweep")
    run.add_argument("--config", required=True, help="YAML sweep specification")
    run.add_argument("--out", required=True, help="per-trial CSV output path")
    run.add_argument("--json", help="optional JSON report (spec, summary, records)")
    run.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--timing", action="store_true",
                     help="fill the wall_ms column (makes output run-dependent)")

    doc = sub.add_parser("doctor", help="check every (scheme, point) without running trials")
    doc.add_argument("--config", required=True)
    return p


def _print_summary(rows, out):
    out.write(f"{'scheme':<18}{'snr_db':>8}{'n_b':>5}{'feasible':>10}"
              f"{'sum_rate':>11}{'stderr':>9}\n")
    for r in rows:
        out.write(f"{r.scheme:<18}{r.snr_db:>8.2f}{r.n_b:>5}{r.feasible_fraction:>10.2f}"
                  f"{r.mean_sum_rate:>11.4f}{r.stderr_sum_rate:>9.4f}\n")


def cmd_run(args) -> int:
    try:
        spec = harness.load_spec(args.config)
        if args.seed is not None:
            spec = spec.with_seed(args.seed)
        if args.threads < 1:
            raise harness.ConfigError("--threads must be >= 1")
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        records = harness.run_sweep(spec, workers=args.threads)
    except harness.NumericalFailure as exc:
        print(f"numerical failure: {exc} (seed {exc.seed})", file=sys.stderr)
        return EXIT_NUMERIC
    with open(args.out, "w", newline="") as fh:
        fh.write(harness.records_to_csv(records, spec.base_config.streams, args.timing))
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(harness.report_json(spec, records, args.timing))
    _print_summary(harness.aggregate(records), sys.stdout)
    return EXIT_OK


def cmd_doctor(args) -> int:
    try:
        spec = harness.load_spec(args.config)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for scheme, snr, nb, status in harness.doctor(spec):
        print(f"{scheme:<18} snr_db={snr:<7g} n_b={nb:<3} {status}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "doctor": cmd_doctor}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
