"""Command-line entry point: simulate, form, sweep, report.

Exit codes: 0 success, 2 configuration error, 3 infeasible seeding
(requested coalition count unreachable at any threshold), 1 other
package errors.
"""

import argparse
import sys

from . import run as runner
from .config import load_config
from .errors import ConfigError, InfeasibleError, ProcoalError


def _add_common(parser, mode_flag=True):
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    if mode_flag:
        parser.add_argument("--mode", choices=("analytic", "empirical"), default=None,
                            help="contract mode (overrides config)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="procoal",
        description="Simulate prosumer pools and form production-stable coalitions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate per-agent power series")
    _add_common(p_sim, mode_flag=False)

    p_form = sub.add_parser("form", help="form coalitions at a single parameter point")
    _add_common(p_form)
    p_form.add_argument("--series", default=None,
                        help="series.csv (or its directory) from a previous simulate; "
                             "simulated in-memory when omitted")

    p_sweep = sub.add_parser("sweep", help="sweep the (phi, p_min, n_coal) space")
    _add_common(p_sweep)
    p_sweep.add_argument("--series", default=None,
                         help="reuse a simulated series.csv instead of resimulating")

    p_rep = sub.add_parser("report", help="aggregate sweep outputs (mean/std per point)")
    p_rep.add_argument("sweeps", nargs="+", help="sweep.csv files")
    p_rep.add_argument("--out", default="out", help="output directory")
    return parser


def _load(args):
    overrides = {"seed": getattr(args, "seed", None),
                 "mode": getattr(args, "mode", None),
                 "out_dir": getattr(args, "out", None)}
    return load_config(args.config, overrides)


def _get_series(cfg, args):
    if getattr(args, "series", None):
        return runner.load_series(args.series)
    return runner.simulate(cfg).series


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load(args)
            sim = runner.simulate(cfg)
            path = runner.write_simulation(cfg.out_dir, cfg, sim)
            print(f"wrote {len(sim.series)} series to {path}")
        elif args.command == "form":
            cfg = _load(args)
            results = runner.form_run(cfg, _get_series(cfg, args))
            out = runner.write_form(cfg.out_dir, cfg, results)
            print(f"wrote {len(results)} structures to {out}")
        elif args.command == "sweep":
            cfg = _load(args)
            results = runner.sweep_run(cfg, _get_series(cfg, args))
            out = runner.write_sweep(cfg.out_dir, cfg, results)
            print(f"wrote {len(results)} sweep rows to {out}")
        elif args.command == "report":
            rows = runner.report_run(args.sweeps)
            path = runner.write_report(args.out, rows)
            print(f"wrote {len(rows)} aggregated rows to {path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except ProcoalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
