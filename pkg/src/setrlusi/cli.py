"""Command-line entry points: run, stats, bench, gen.

Exit codes: 0 success, 2 config error, 3 training failure, 4 IO error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ._backend import active_backend
from .datasets import CsvFormatError, gen_synthetic_domains, twelve_domain_spec
from .ensemble import TrainingError
from .experiment import (
    ConfigError,
    accuracy_table,
    bench_backends,
    bench_scaling,
    emit_results,
    load_config,
    read_results,
    run_experiment,
)
from .stats import DegenerateRanksError, friedman_statistic, nemenyi_cd

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_IO = 4


def _cmd_run(args) -> int:
    config = load_config(args.config)
    results = run_experiment(config)
    paths = emit_results(results, config.run.output, config.run.format)
    for result in results:
        print(
            f"{result.task_name} {result.method_name}: "
            f"accuracy {result.accuracy_mean:.4f} +/- {result.accuracy_std:.4f} "
            f"({result.trials} trials, {result.wall_time_seconds:.2f}s)"
        )
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    rows = []
    for path in args.results:
        rows.extend(read_results(path))
    tasks, methods, table = accuracy_table(rows)
    result = friedman_statistic(table)
    print(f"datasets: {len(tasks)}  methods: {len(methods)}")
    print(f"chi_square_F = {result.chi_square_f:.4f}")
    print(f"F_F = {result.f_f:.4f}")
    for method, rank in zip(methods, result.average_ranks):
        print(f"  rank {rank:.3f}  {method}")
    if 2 <= len(methods) <= 10:
        cd = nemenyi_cd(len(methods), len(tasks), alpha=args.alpha)
        print(f"nemenyi CD (alpha={args.alpha}) = {cd:.4f}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    print(f"active backend: {active_backend()}")
    print("backend comparison (best of {} runs):".format(args.repeats))
    rows = bench_backends(repeats=args.repeats)
    for op, q, py_s, cy_s in rows:
        if cy_s is None:
            print(f"  {op:<11} q={q:<5} python {py_s * 1e3:8.3f} ms   compiled n/a")
        else:
            print(
                f"  {op:<11} q={q:<5} python {py_s * 1e3:8.3f} ms   "
                f"compiled {cy_s * 1e3:8.3f} ms   x{py_s / cy_s:.1f}"
            )
    q_values = tuple(int(v) for v in args.q)
    print(f"scaling sweep over q = {q_values} (H={args.H}):")
    report = bench_scaling(q_values=q_values, H=args.H, seed=args.seed)
    for q, seconds in report["timings"]:
        print(f"  q={q:<5} {seconds:8.3f} s")
    print(f"log-log slope: {report['slope']:.3f}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "seconds"])
            for q, seconds in report["timings"]:
                writer.writerow([q, repr(seconds)])
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = twelve_domain_spec(n_per_domain=args.n_per_domain, seed=args.seed)
    domains = gen_synthetic_domains(spec)
    for domain in domains:
        path = outdir / f"{domain.name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "label"])
            for row, label in zip(domain.features, domain.labels):
                writer.writerow([repr(float(row[0])), repr(float(row[1])), int(label)])
        print(f"wrote {path}")
    config_path = outdir / "task.toml"
    sources = [f'"{domains[i].name}.csv"' for i in (1, 2, 3)]
    config_path.write_text(
        "[task]\n"
        'name = "synthetic12"\n'
        f"source_csvs = [{', '.join(sources)}]\n"
        f'target_csv = "{domains[0].name}.csv"\n'
        'label_column = "label"\n'
        "split_fraction = 0.1\n"
        f"seed = {args.seed}\n\n"
        "[model]\n"
        "tau = 0.5\ngamma = 0.5\nlambda = 0.01\nH = 100\n"
        'kernel = "rbf"\nregularizer_mode = "identity"\nscaling = "minmax"\n\n'
        "[experiment]\n"
        f"trials = 10\nworkers = 1\noutput = \"{outdir / 'results'}\"\n"
        'format = "json_lines"\n'
    )
    print(f"wrote {config_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setrlusi",
        description="Stochastic ensemble multi-source transfer learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="TOML config with [task], [model], [experiment]")
    p_run.set_defaults(func=_cmd_run)

    p_stats = sub.add_parser("stats", help="Friedman/Nemenyi over result files")
    p_stats.add_argument("results", nargs="+", help="records files from 'run'")
    p_stats.add_argument("--alpha", type=float, default=0.10, choices=[0.05, 0.10])
    p_stats.set_defaults(func=_cmd_stats)

    p_bench = sub.add_parser("bench", help="backend comparison and scaling sweep")
    p_bench.add_argument("--q", nargs="+", default=[50, 100, 200, 400])
    p_bench.add_argument("--H", type=int, default=10)
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", help="CSV path for the scaling timings")
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser("gen", help="write the synthetic 12-domain task files")
    p_gen.add_argument("outdir")
    p_gen.add_argument("--n-per-domain", type=int, default=200)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (OSError, CsvFormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, DegenerateRanksError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
