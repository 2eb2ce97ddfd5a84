"""
Command-line entry point.

::

    risdip simulate --config run.cfg --snr 0,5,10 --trials 20 --out results.csv
    risdip hwi-sweep --preset desk --bits 2,3,4 --estimators ls,dip

Exit status is 0 on success, 2 for configuration errors and 1 when a
trial fails at run time.
"""

import argparse
import logging
import sys
from dataclasses import replace

from .config import PRESETS, ExperimentConfig, read_config
from .errors import ConfigError
from .harness import TrialFailure, run_experiment, run_hwi_sweep, write_csv

log = logging.getLogger("risdip")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _float_list(text):
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _common(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="base parameter set")
    p.add_argument("--snr", type=_float_list, help="SNR points in dB, e.g. 0,5,10")
    p.add_argument("--trials", type=int)
    p.add_argument("--estimators", type=_str_list, help="subset of ls,lmmse,dip,onoff")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risdip", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("simulate", help="NMSE versus SNR for each estimator"))
    hwi = sub.add_parser("hwi-sweep", help="NMSE versus SNR for several converter resolutions")
    _common(hwi)
    hwi.add_argument("--bits", type=_int_list, default=(2, 3, 4))
    hwi.add_argument("--no-ideal", action="store_true", help="skip the ideal-hardware baseline")
    return parser


def resolve_config(args) -> ExperimentConfig:
    """Config from ``--preset``/``--config`` with command-line overrides applied last."""
    base = PRESETS[args.preset]() if args.preset else None
    if args.config:
        try:
            cfg = read_config(args.config, base)
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
    elif base is not None:
        cfg = base
    else:
        raise ConfigError("give --config and/or --preset")
    over = {}
    if args.snr is not None:
        over["snr_db"] = args.snr
    if args.trials is not None:
        over["trials"] = args.trials
    if args.estimators is not None:
        over["estimators"] = args.estimators
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["output"] = args.out
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    try:
        return replace(cfg, **over)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _print_table(result, out):
    print(f"{'estimator':<14} {'snr_db':>7} {'metric':<9} {'nmse':>12} {'ci95':>10}", file=out)
    for row in result.table:
        print(f"{row.estimator:<14} {row.snr_db:>7g} {row.metric_mode:<9} "
              f"{row.mean:>12.5g} {row.ci95:>10.3g}", file=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "hwi-sweep" and not args.bits:
            raise ConfigError("--bits must not be empty")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            result = run_experiment(cfg, workers=args.threads)
        else:
            result = run_hwi_sweep(cfg, args.bits, workers=args.threads,
                                   include_ideal=not args.no_ideal)
        write_csv(result.records, cfg.output)
    except (TrialFailure, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_table(result, sys.stdout)
    log.info("wrote %d records to %s", len(result.records), cfg.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
