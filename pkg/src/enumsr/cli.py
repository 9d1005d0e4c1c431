"""Command line interface: single runs, benchmark suites, space statistics.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 unexpected
runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import asdict

from . import __version__
from .datasets import Dataset, DatasetError, benchmark_ids, generate, load_csv
from .enumeration import space_stats
from .expr import render_fitted
from .fitting import FitConfig
from .grammar import build_default_grammar
from .search import SearchConfig, SearchReport, run

__all__ = ["main"]

SOLVED_NMSE = 1e-8

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class ConfigError(ValueError):
    pass


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-var-refs", type=int, default=20, metavar="N",
                   help="variable reference budget per expression (default 20)")
    p.add_argument("--budget", type=int, default=200_000, metavar="N",
                   help="maximum number of fitted sentences (default 200000)")
    p.add_argument("--weight-w", type=float, default=0.05, metavar="W",
                   help="length bonus weight in the expansion priority")
    p.add_argument("--lm-iterations", type=int, default=100, metavar="N",
                   help="optimizer iteration cap per restart (default 100)")
    p.add_argument("--lm-restarts", type=int, default=10, metavar="N",
                   help="random restarts per sentence (default 10)")
    p.add_argument("--seed", type=int, default=1,
                   help="seed for all randomness (default 1)")
    p.add_argument("--target-nmse", type=float, default=SOLVED_NMSE,
                   metavar="T", help="stop once train NMSE drops below T")
    p.add_argument("--no-early-stop", action="store_true",
                   help="always run until the budget or frontier is exhausted")
    p.add_argument("--time-limit", type=float, default=None, metavar="SECONDS",
                   help="wall clock limit; makes results timing-dependent")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--csv", metavar="PATH", help="load data from a CSV file")
    p.add_argument("--target", metavar="COLUMN",
                   help="target column name for --csv")
    p.add_argument("--train-fraction", type=float, default=0.75, metavar="F",
                   help="seed-shuffled train share for --csv (default 0.75)")
    p.add_argument("--train-rows", metavar="A:B",
                   help="explicit train row range for --csv, half open")
    p.add_argument("--test-rows", metavar="A:B",
                   help="explicit test row range for --csv, half open")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enumsr",
        description="Deterministic symbolic regression by exhaustive "
                    "grammar enumeration.")
    parser.add_argument("--version", action="version",
                        version=f"enumsr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="search one dataset")
    p_run.add_argument("--benchmark", metavar="ID",
                       help="benchmark instance, e.g. nguyen-1")
    _add_data_flags(p_run)
    _add_search_flags(p_run)
    p_run.add_argument("--out", metavar="PATH", help="write a JSON report")

    p_suite = sub.add_parser("suite", help="search several benchmarks")
    p_suite.add_argument("--benchmarks", required=True, metavar="ID[,ID...]",
                         help="comma separated benchmark ids, or 'all'")
    _add_search_flags(p_suite)
    p_suite.add_argument("--out", metavar="PATH", help="write a JSON report")

    p_stats = sub.add_parser(
        "space-stats",
        help="enumerate the expression space and report duplication counts")
    p_stats.add_argument("--features", type=int, default=1, metavar="N",
                         help="number of variables (default 1, guard 3)")
    p_stats.add_argument("--max-var-refs", type=int, default=2, metavar="N",
                         help="variable reference budget (default 2, guard 4)")
    return parser


def _parse_range(text: str | None, flag: str) -> tuple[int, int] | None:
    if text is None:
        return None
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects A:B, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"{flag} expects integers, got {text!r}") from None


def _search_config(args: argparse.Namespace) -> SearchConfig:
    if args.max_var_refs < 1:
        raise ConfigError("--max-var-refs must be at least 1")
    if args.budget < 1:
        raise ConfigError("--budget must be at least 1")
    if args.lm_iterations < 1 or args.lm_restarts < 1:
        raise ConfigError("--lm-iterations and --lm-restarts must be at least 1")
    fit_cfg = FitConfig(max_iterations=args.lm_iterations,
                        restarts=args.lm_restarts)
    target = None if args.no_early_stop else args.target_nmse
    return SearchConfig(
        max_variable_refs=args.max_var_refs,
        max_evaluated_sentences=args.budget,
        weight_w=args.weight_w,
        fit=fit_cfg,
        seed=args.seed,
        target_train_nmse=target,
        time_limit_s=args.time_limit,
    )


def _load_run_dataset(args: argparse.Namespace) -> Dataset:
    if (args.benchmark is None) == (args.csv is None):
        raise ConfigError("give exactly one of --benchmark or --csv")
    if args.benchmark is not None:
        if args.benchmark not in benchmark_ids():
            raise ConfigError(
                f"unknown benchmark {args.benchmark!r}; see `enumsr suite "
                f"--benchmarks all` or the README for the catalog")
        return generate(args.benchmark, args.seed)
    if args.target is None:
        raise ConfigError("--csv requires --target")
    return load_csv(args.csv, args.target,
                    train_fraction=args.train_fraction, seed=args.seed,
                    train_rows=_parse_range(args.train_rows, "--train-rows"),
                    test_rows=_parse_range(args.test_rows, "--test-rows"))


def _report_dict(name: str, data: Dataset, report: SearchReport) -> dict:
    best = report.best
    return {
        "tool": {"name": "enumsr", "version": __version__},
        "dataset": {
            "name": name,
            "feature_names": list(report.feature_names),
            "train_rows": int(data.X_train.shape[0]),
            "test_rows": 0 if data.X_test is None else int(data.X_test.shape[0]),
        },
        "config": {
            "max_variable_refs": report.config.max_variable_refs,
            "max_evaluated_sentences": report.config.max_evaluated_sentences,
            "weight_w": report.config.weight_w,
            "seed": report.config.seed,
            "target_train_nmse": report.config.target_train_nmse,
            "time_limit_s": report.config.time_limit_s,
            "lm_iterations": report.config.fit.max_iterations,
            "lm_restarts": report.config.fit.restarts,
            "length_max": report.length_max,
        },
        "result": {
            "solved": bool(best.train_nmse < SOLVED_NMSE),
            "expression": _expression_text(report),
            "expression_fitted": _fitted_text(report),
            "coefficients": list(best.coefficients),
            "train_nmse": best.train_nmse,
            "test_nmse": best.test_nmse,
            "stop_reason": report.stop_reason,
            "counters": asdict(report.counters),
        },
        "timing": {"elapsed_s": report.elapsed_s},
        "improvements": [
            {
                "evaluated": rec.evaluated,
                "elapsed_ms": rec.elapsed_ms,
                "expression": rec.expression,
                "coefficients": list(rec.coefficients),
                "train_nmse": rec.train_nmse,
                "test_nmse": rec.test_nmse,
            }
            for rec in report.improvements
        ],
    }


def _expression_text(report: SearchReport) -> str:
    from .expr import render_infix
    return render_infix(report.best.sentence, report.feature_names)


def _fitted_text(report: SearchReport) -> str:
    return render_fitted(report.best.sentence, report.best.coefficients,
                         report.feature_names)


def _print_run_table(name: str, data: Dataset, report: SearchReport) -> None:
    best = report.best
    rows = [
        ("dataset", name),
        ("train/test rows", f"{data.X_train.shape[0]}/"
         f"{0 if data.X_test is None else data.X_test.shape[0]}"),
        ("best", _expression_text(report)),
        ("fitted", _fitted_text(report)),
        ("train NMSE", f"{best.train_nmse:.3e}"),
        ("test NMSE", f"{best.test_nmse:.3e}"),
        ("solved", "yes" if best.train_nmse < SOLVED_NMSE else "no"),
        ("evaluated sentences", str(report.counters.evaluated_sentences)),
        ("rejected duplicates", str(report.counters.rejected_duplicates)),
        ("stop reason", report.stop_reason),
        ("elapsed", f"{report.elapsed_s:.1f} s"),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value}")
    if report.improvements:
        print()
        print(f"{'evaluated':>9}  {'train NMSE':>11}  {'test NMSE':>11}  expression")
        for rec in report.improvements:
            print(f"{rec.evaluated:>9}  {rec.train_nmse:>11.3e}  "
                  f"{rec.test_nmse:>11.3e}  {rec.expression}")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _search_config(args)
    data = _load_run_dataset(args)
    name = args.benchmark if args.benchmark is not None else args.csv
    report = run(data, cfg)
    _print_run_table(name, data, report)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(_report_dict(name, data, report), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_suite(args: argparse.Namespace) -> int:
    cfg = _search_config(args)
    if args.benchmarks.strip() == "all":
        ids = benchmark_ids()
    else:
        ids = [b.strip() for b in args.benchmarks.split(",") if b.strip()]
    if not ids:
        raise ConfigError("--benchmarks is empty")
    unknown = [b for b in ids if b not in benchmark_ids()]
    if unknown:
        raise ConfigError(f"unknown benchmarks: {', '.join(unknown)}")

    rows = []
    for benchmark in ids:
        try:
            data = generate(benchmark, args.seed)
            report = run(data, cfg)
            rows.append({
                "benchmark": benchmark,
                "status": "solved" if report.best.train_nmse < SOLVED_NMSE
                          else "unsolved",
                "train_nmse": report.best.train_nmse,
                "test_nmse": report.best.test_nmse,
                "expression": _expression_text(report),
                "evaluated": report.counters.evaluated_sentences,
                "elapsed_s": report.elapsed_s,
            })
        except Exception as exc:  # record the failure, keep the suite going
            rows.append({"benchmark": benchmark, "status": "error",
                         "error": f"{type(exc).__name__}: {exc}"})
    name_w = max(len(r["benchmark"]) for r in rows)
    print(f"{'benchmark':<{name_w}}  {'status':<8}  {'train NMSE':>11}  "
          f"{'test NMSE':>11}  {'evaluated':>9}")
    for r in rows:
        if r["status"] == "error":
            print(f"{r['benchmark']:<{name_w}}  {'error':<8}  {r['error']}")
        else:
            print(f"{r['benchmark']:<{name_w}}  {r['status']:<8}  "
                  f"{r['train_nmse']:>11.3e}  {r['test_nmse']:>11.3e}  "
                  f"{r['evaluated']:>9}")
    if args.out:
        payload = {
            "tool": {"name": "enumsr", "version": __version__},
            "config": {
                "max_variable_refs": cfg.max_variable_refs,
                "max_evaluated_sentences": cfg.max_evaluated_sentences,
                "weight_w": cfg.weight_w,
                "seed": cfg.seed,
                "target_train_nmse": cfg.target_train_nmse,
            },
            "rows": rows,
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_space_stats(args: argparse.Namespace) -> int:
    if not 1 <= args.features <= 3:
        raise ConfigError("--features must be between 1 and 3 (guard)")
    if not 1 <= args.max_var_refs <= 4:
        raise ConfigError("--max-var-refs must be between 1 and 4 (guard)")
    grammar = build_default_grammar([f"x{i + 1}" for i in range(args.features)])
    stats = space_stats(grammar, args.max_var_refs)
    rows = [
        ("features", str(stats.n_features)),
        ("max var refs", str(stats.max_var_refs)),
        ("derivations (tree)", str(stats.derivations)),
        ("sentences (tree)", str(stats.sentences)),
        ("distinct sentences", str(stats.distinct_sentences)),
        ("distinct canonical", str(stats.distinct_canonical)),
        ("graph derived", str(stats.graph_derived)),
        ("graph rejected", str(stats.graph_rejected)),
        ("graph sentences", str(stats.graph_sentences)),
        ("rejection ratio", f"{stats.rejection_ratio:.3f}"),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "suite":
            return cmd_suite(args)
        return cmd_space_stats(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
