"""``rkal`` command line: accuracy and cavity runs, parameter sweeps, identity checks."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, NewtonDiverged
from .runner import RunConfig, emit_results, parse_config, parse_value, run

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_DIVERGED = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _onoff(text):
    try:
        return parse_value("onoff", text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fraction(text):
    try:
        return parse_value("fraction", text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_run_flags(p):
    p.add_argument("--stages", "-s", type=int, default=2)
    p.add_argument("--level", "-l", type=int, default=3)
    p.add_argument("--nu", type=_fraction, default=None, help="viscosity, e.g. 0.01 or 1/100")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tableau", default="RadauIIA", help="RadauIIA, Gauss or LobattoIIIC")
    p.add_argument("--nt", type=int, default=None, help="time steps (default: step-size rule)")
    p.add_argument("--T", type=float, default=2.0, dest="T")
    p.add_argument("--w-mode", default="diag", choices=["diag", "full"])
    p.add_argument("--diag-solve", default="exact", choices=["exact", "inexact"])
    p.add_argument("--lps", type=_onoff, default=None, help="on, off or auto")
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--abs-tol", type=float, default=1e-10)


def _add_common(p):
    p.add_argument("--out", default=None, help="output prefix for .csv and .json (default: CSV to stdout)")
    p.add_argument("--no-timing", action="store_true", help="write nan for CPU columns (byte-stable output)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = _Parser(prog="rkal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("accuracy", "cavity"):
        p = sub.add_parser(name, help=f"{name} run")
        _add_run_flags(p)
        _add_common(p)
    p = sub.add_parser("sweep", help="run every [run] block of a config file")
    p.add_argument("config")
    _add_common(p)
    p = sub.add_parser("verify", help="dense identity checks on small instances")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        problem=args.command,
        family=args.tableau,
        s=args.stages,
        level=args.level,
        nu=args.nu,
        gamma=args.gamma,
        T=args.T,
        n_t=args.nt,
        w_mode=args.w_mode,
        diag_solve=args.diag_solve,
        lps=args.lps,
        rel_tol=args.rel_tol,
        abs_tol=args.abs_tol,
        timing=not args.no_timing,
    )


def _verify():
    from ..verify import run_all

    results = run_all()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED_CHECK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "verify":
        return _verify()
    try:
        if args.command == "sweep":
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from None
            configs = parse_config(text)
            for c in configs:
                c.timing = not args.no_timing
        else:
            configs = [_config_from_args(args)]
        rows = [run(c) for c in configs]
    except ConfigError as exc:
        print(f"rkal: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NewtonDiverged as exc:
        print(f"rkal: divergence at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    result = emit_results(rows, args.out)
    if args.out is None:
        sys.stdout.write(result)
    else:
        for p in result:
            print(p, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
