"""nsi-ibp-bench: run accuracy sweeps and check them against tolerances.

Exit codes: 0 pass, 1 tolerance failure, 2 configuration error, 3 engine error.
"""
from __future__ import annotations

import argparse
import sys
import time

from . import kernels
from .bench import (SweepConfig, compare_against_reference, emit_report, format_summary, load_config,
                    load_report, load_tolerances, run_suite)
from .errors import ConfigurationError, NsiIbpError

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_ENGINE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _common(p):
    p.add_argument("--config", help="JSON sweep configuration")
    p.add_argument("--suite", help="suite name (overrides the config)")
    p.add_argument("--panels", type=int, help="quadrature panels")
    p.add_argument("--points-per-panel", type=int, help="Gauss points per panel")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nsi-ibp-bench", description=__doc__.splitlines()[0],
                 epilog="Grids: --grid-<param>=start:step:stop, log10:start:step:stop or a comma list.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run one suite and write its report")
    _common(run)
    run.add_argument("--out", help="report path ('-' for stdout)")
    run.add_argument("--format", choices=("csv", "json"), help="report format")
    chk = sub.add_parser("check", help="run a suite (or read a report) and apply tolerances")
    _common(chk)
    chk.add_argument("--report", help="check an existing report instead of running")
    chk.add_argument("--tolerances", help="JSON tolerance map (packaged defaults if omitted)")
    chk.add_argument("--out", help="also write the report here")
    chk.add_argument("--format", choices=("csv", "json"), help="report format")
    return ap


def _grid_flags(extra):
    """Collect --grid-<param>=spec (or --grid-<param> spec) from leftover arguments."""
    grids, i = {}, 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--grid-"):
            raise ConfigurationError(f"unrecognised argument {arg!r}")
        name, eq, spec = arg[len("--grid-"):].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise ConfigurationError(f"{arg} needs a value")
            spec, i = extra[i + 1], i + 1
        if not name:
            raise ConfigurationError("empty grid parameter name")
        grids[name.replace("-", "_")] = spec
        i += 1
    return grids


def _config(args, grids) -> SweepConfig:
    over = {"suite": args.suite, "panels": args.panels, "points_per_panel": args.points_per_panel,
            "out": args.out, "format": args.format, "grids": grids}
    if args.config:
        return load_config(args.config, over)
    if not args.suite:
        raise ConfigurationError("give --suite or --config")
    return SweepConfig.from_dict({}, over)


def _run(cfg: SweepConfig):
    t0 = time.perf_counter()
    records = run_suite(cfg)
    bad = sum(not r.ok for r in records)
    print(f"{cfg.suite}: {len(records)} cells, {bad} errors, {time.perf_counter() - t0:.2f} s "
          f"(kernel backend: {kernels.BACKEND})", file=sys.stderr)
    if records and bad == len(records):
        raise NsiIbpError(f"every cell of suite {cfg.suite} failed (first: {records[0].status})")
    return records


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args, extra = ap.parse_known_args(argv)
        grids = _grid_flags(extra)
        if args.command == "run":
            cfg = _config(args, grids)
            records = _run(cfg)
            emit_report(records, cfg.format, cfg.out or "-")
            return EXIT_OK
        tol = load_tolerances(args.tolerances)
        if args.report:
            if args.config or args.suite or grids:
                raise ConfigurationError("--report cannot be combined with a sweep definition")
            records = load_report(args.report)
        else:
            cfg = _config(args, grids)
            records = _run(cfg)
            if cfg.out:
                emit_report(records, cfg.format, cfg.out)
        summary = compare_against_reference(records, tol)
        print(format_summary(summary))
        return EXIT_OK if all(s.passed for s in summary.values()) else EXIT_TOLERANCE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NsiIbpError, ArithmeticError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
