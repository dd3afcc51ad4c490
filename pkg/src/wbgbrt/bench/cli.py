"""``wbgbrt`` command line.

Exit status: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..core_data import write_delimited
from ..datasets import convert_matrix_txt, convert_prsa
from ..errors import ConfigError, DataError, NumericalError
from . import harness
from .config import read_config

EXIT_CODES = ((ConfigError, 1), (DataError, 2), (NumericalError, 3))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="experiment .cfg file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--output", help="output directory (same as --set experiment.output=...)")
    p.add_argument("--seed", type=int, help="same as --set boost.seed=...")
    p.add_argument("--data", help="dataset path (same as --set data.path=...)")
    p.add_argument("--backend", choices=("compiled", "python"), help="force a kernel backend")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wbgbrt", description="Window-based GBRT forecasting benchmarks")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest, impute and derive covariates; write the canonical frame")
    _common(p)
    p.add_argument("--out", required=True, help="canonical CSV to write")

    p = sub.add_parser("tune", help="grid search on the validation split only")
    _common(p)

    p = sub.add_parser("run", help="grid search, final retrain and test evaluation")
    _common(p)

    p = sub.add_parser("compare", help="relative metric differences between two reports")
    p.add_argument("reports", nargs="+", help="one or two reports.json files or run directories")
    p.add_argument("--a", dest="model_a", help="model of report a (default: first)")
    p.add_argument("--b", dest="model_b", help="model of report b (default: first of the second file)")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("plotdata", help="write (time_index, actual, predicted) CSVs per series")
    p.add_argument("reports", nargs="+", help="reports.json files or run directories")
    p.add_argument("--out", required=True, help="directory for the CSV files")

    p = sub.add_parser("convert", help="reshape a raw public dataset into canonical CSV")
    p.add_argument("kind", choices=("matrix", "prsa"))
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--start", default="2000-01-01 00:00:00", help="first timestamp (matrix files)")
    p.add_argument("--rate", default="1d", help="sample rate such as 1h, 10min, 1d (matrix files)")
    p.add_argument("--rows", type=int, help="keep only the first ROWS rows (matrix files)")
    return parser


def _config(args):
    overrides = list(args.overrides)
    if args.output:
        overrides.append(f"experiment.output={os.path.abspath(args.output)}")
    if args.seed is not None:
        overrides.append(f"boost.seed={args.seed}")
    if args.data:
        overrides.append(f"data.path={os.path.abspath(args.data)}")
    return read_config(args.config, overrides)


def _pick(reports, model, path):
    if not reports:
        raise DataError(f"{path} holds no reports")
    if model is None:
        return reports[0]
    for r in reports:
        if r.model == model:
            return r
    raise ConfigError(f"{path} has no report for model {model!r}; available: {[r.model for r in reports]}")


def _cmd_compare(args) -> None:
    if len(args.reports) > 2:
        raise ConfigError("compare takes one or two report files")
    first = harness.load_reports(args.reports[0])
    second = harness.load_reports(args.reports[-1]) if len(args.reports) == 2 else first
    a = _pick(first, args.model_a, args.reports[0])
    if len(args.reports) == 1 and args.model_b is None:
        raise ConfigError("with a single report file, name both models via --a and --b")
    b = _pick(second, args.model_b, args.reports[-1])
    diff = harness.compare(a, b)
    if args.json:
        print(json.dumps(diff, indent=1, sort_keys=True))
    else:
        sys.stdout.write(harness.render_compare(a, b, diff))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.command == "prepare":
            cfg = _config(args)
            frame = harness.prepare_frame(cfg)
            write_delimited(frame, args.out)
            print(f"wrote {args.out}: n={frame.n} T={frame.T} M={frame.M} covariates={list(frame.covariate_names)}")
        elif args.command == "tune":
            cfg = _config(args)
            sel = harness.tune_and_write(cfg, args.backend)
            for name, s in sel.items():
                print(f"{name}: {json.dumps(s.to_dict()['selected'], sort_keys=True)}")
            print(f"selection written to {os.path.join(cfg.output, harness.SELECTION_JSON)}")
        elif args.command == "run":
            cfg = _config(args)
            harness.run_and_write(cfg, args.backend)
            with open(os.path.join(cfg.output, harness.REPORT_TXT), encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
            print(f"reports written to {cfg.output}")
        elif args.command == "compare":
            _cmd_compare(args)
        elif args.command == "plotdata":
            reports = [r for p in args.reports for r in harness.load_reports(p)]
            files = harness.emit_plot_data(reports, args.out)
            print(f"wrote {len(files)} files to {args.out}")
        elif args.command == "convert":
            if args.kind == "matrix":
                n = convert_matrix_txt(args.src, args.dst, args.start, args.rate, args.rows)
            else:
                n = convert_prsa(args.src, args.dst)
            print(f"wrote {n} rows to {args.dst}")
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DataError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES:
            if isinstance(exc, cls):
                return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
