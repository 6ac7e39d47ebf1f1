"""Command-line front end.

    tagdm run   --data FILE --problem PRESET|SPECFILE --solver NAME [options]
    tagdm bench --config FILE --out FILE
    tagdm synth --tuples INT --clusters INT --seed INT --out FILE

Exit status: 0 on success, 2 when the solver finds no result, 1 on error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import format_rows, load_config, run_benchmark
from .fdp import FDP_MODES, METRICS
from .lsh import DEFAULT_BITS, DEFAULT_BUCKET_MAX, DEFAULT_TABLES
from .mining import DEFAULT_MAX_CANDIDATES, BudgetExceededError, PRESETS, resolve_problem
from .model import DataError, Predicate
from .query import SOLVERS, Query, Tunables, UsageError, render_csv, render_json, render_text, run_query
from .signature import DEFAULT_VOCABULARY_SIZE
from .synth import generate_synthetic

EXIT_OK, EXIT_ERROR, EXIT_NO_RESULT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for "no result"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tagdm", description="Mine similar/diverse groups of tagging actions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve one problem on a data file")
    run.add_argument("--data", required=True, help="tab-separated tagging file")
    run.add_argument("--problem", required=True, help=f"preset ({', '.join(PRESETS)}) or YAML/JSON problem file")
    run.add_argument("--solver", required=True, choices=SOLVERS)
    run.add_argument("--scope", action="append", default=[], metavar="DIM:ATTR=VALUE",
                     help="restrict tuples before enumeration (repeatable), e.g. u:gender=male")
    run.add_argument("--k", type=int, help="maximum result size (k_hi)")
    run.add_argument("--k-lo", type=int, help="minimum result size")
    run.add_argument("--support", type=int, help="minimum group support p")
    run.add_argument("--q", type=float, help="user constraint threshold")
    run.add_argument("--r", type=float, help="item constraint threshold")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--format", choices=("text", "json", "csv"), default="text")
    run.add_argument("--timing", action="store_true", help="include runtime_ms in json/csv output")
    run.add_argument("--lsh-bits", type=int, default=DEFAULT_BITS, help="initial bits per hash signature")
    run.add_argument("--lsh-tables", type=int, default=DEFAULT_TABLES)
    run.add_argument("--bucket-max", type=int, default=DEFAULT_BUCKET_MAX,
                     help="largest bucket searched exhaustively")
    run.add_argument("--metric", choices=METRICS, default="angular")
    run.add_argument("--fdp-mode", choices=FDP_MODES)
    run.add_argument("--min-size", type=int, default=5, help="minimum tuples per group")
    run.add_argument("--max-predicates", type=int)
    run.add_argument("--vocab-size", type=int, default=DEFAULT_VOCABULARY_SIZE)
    run.add_argument("--signatures", help="precomputed signature file (index<TAB>w1,w2,...)")
    run.add_argument("--max-candidates", type=int, default=DEFAULT_MAX_CANDIDATES,
                     help="exact solver budget")

    bench = sub.add_parser("bench", help="run a timing/quality benchmark")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--delimiter", default=",")

    synth = sub.add_parser("synth", help="write a synthetic data file")
    synth.add_argument("--tuples", type=int, required=True)
    synth.add_argument("--clusters", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    spec = resolve_problem(args.problem).with_overrides(
        k=args.k, k_lo=args.k_lo, support=args.support, q=args.q, r=args.r)
    tun = Tunables(
        seed=args.seed, lsh_bits=args.lsh_bits, lsh_tables=args.lsh_tables, bucket_max=args.bucket_max,
        metric=args.metric, fdp_mode=args.fdp_mode, min_size=args.min_size,
        max_predicates=args.max_predicates, vocab_size=args.vocab_size, signatures=args.signatures,
        max_candidates=args.max_candidates,
    )
    query = Query(spec=spec, solver=args.solver, scope=tuple(Predicate.parse(s) for s in args.scope), tunables=tun)
    report = run_query(query, args.data)
    if args.format == "json":
        sys.stdout.write(render_json(report, args.timing))
    elif args.format == "csv":
        sys.stdout.write(render_csv(report, args.timing))
    else:
        sys.stdout.write(render_text(report))
    return EXIT_OK if report["status"] == "ok" else EXIT_NO_RESULT


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    rows = run_benchmark(cfg, base=Path(args.config).resolve().parent)
    Path(args.out).write_text(format_rows(rows, args.delimiter), encoding="utf-8")
    return EXIT_OK


def _cmd_synth(args) -> int:
    generate_synthetic(args.tuples, args.clusters, args.seed, args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "bench": _cmd_bench, "synth": _cmd_synth}[args.command]
    try:
        return handler(args)
    except (UsageError, DataError, BudgetExceededError, ValueError, OSError) as exc:
        print(f"tagdm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
