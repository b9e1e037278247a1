"""
Command line entry point.

    oldroydb run <config> [--out DIR] [--seed N] [--threads N]
    oldroydb verify-linear [config] [--out DIR] [--seed N]
    oldroydb fit <csv> [--series NAME ...] [--window F] [--out DIR]

Exit codes: 0 pass, 1 scenario failure, 2 configuration error, 3 I/O error.
``OLDB_THREADS`` overrides ``--threads``.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from .errors import ConfigurationError, InputError
from .experiment import DECAY_SERIES, MIN_R2, parse_config, parse_text, run_scenario

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("oldroydb")


def _overrides(args):
    out = {}
    if getattr(args, "out", None) is not None:
        out["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    return out


def _report(result):
    summary = {k: v for k, v in result.summary.items() if k != "invariants"}
    print(json.dumps(summary, indent=2, sort_keys=True))
    print(f"{result.scenario.kind}: {'PASS' if result.passed else 'FAIL'} "
          f"(outputs in {result.scenario.out_dir})")
    return result.status


def cmd_run(args):
    scenario = parse_config(args.config, _overrides(args))
    return _report(run_scenario(scenario, threads=args.threads))


def cmd_verify_linear(args):
    overrides = _overrides(args)
    if args.config is None:
        scenario = parse_text("kind = linear-verify\n", overrides)
    else:
        scenario = parse_config(args.config, overrides)
        if scenario.kind != "linear-verify":
            raise ConfigurationError(f"key 'kind' must be linear-verify, got {scenario.kind!r}")
    return _report(run_scenario(scenario, threads=args.threads))


def cmd_fit(args):
    try:
        data = dg.read_energy_csv(args.csv)
    except (OSError, ValueError, StopIteration) as exc:
        raise OSError(f"cannot read {args.csv}: {exc}") from None
    series = args.series or list(DECAY_SERIES)
    missing = [s for s in series if s not in data]
    if missing:
        raise ConfigurationError(f"unknown series {missing}; columns are {sorted(data)}")
    t = data["t"]
    if "blowup" in data:
        t_ok = data["blowup"] == 0
    else:
        t_ok = np.ones_like(t, dtype=bool)
    fits, ok = [], True
    for name in series:
        try:
            fit = dg.fit_decay_rate(t[t_ok], data[name][t_ok], window=args.window)
        except InputError as exc:
            log.error("fit of %s failed: %s", name, exc)
            ok = False
            continue
        fits.append(fit.to_json(name))
        ok = ok and fit.rate > 0 and fit.r2 >= MIN_R2
    print(json.dumps(fits, indent=2, sort_keys=True))
    if args.out is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dg.write_fit_json(Path(args.out) / "fits.json", fits)
    return EXIT_PASS if ok else EXIT_FAILURE


def build_parser():
    parser = argparse.ArgumentParser(
        prog="oldroydb", description="Oldroyd-B torus experiments and diagnostics."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides seed)")
        p.add_argument("--threads", type=int, help="concurrent sweep members")

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-linear", help="check the Green's matrix against the oracle")
    p.add_argument("config", nargs="?")
    common(p)
    p.set_defaults(func=cmd_verify_linear)

    p = sub.add_parser("fit", help="fit exponential decay rates to an energy CSV")
    p.add_argument("csv")
    p.add_argument("--series", nargs="+", help=f"columns to fit (default {' '.join(DECAY_SERIES)})")
    p.add_argument("--window", type=float, default=dg.DEFAULT_WINDOW,
                   help="trailing fraction of samples used")
    p.add_argument("--out", help="write fits.json here")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
