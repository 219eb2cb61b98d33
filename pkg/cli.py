"""
boundlda command line

    python cli.py fit --data data/iris.csv --label-column label --method l2blda --d 2 --output w.txt
    python cli.py transform --projection w.txt --data data/iris.csv --output projected.csv
    python cli.py eval --projection w.txt --train train.csv --test test.csv
    python cli.py bench --config bench.json --d-max 3 --seed 0 --output reports
    python cli.py synth --kind fig1 --seed 0 --with-outliers --output fig1.csv

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import logging
import sys
from typing import List, Optional, Union

from bench_errors import EXIT_OK, UsageError, exit_code_for
from bench_runner import (
    SYNTH_KINDS,
    cmd_bench,
    cmd_eval,
    cmd_fit,
    cmd_synth,
    cmd_transform,
    load_run_config,
)
from dataset_loader import LabeledDataset, load_csv, normalize_minmax
from l1blda_admm import AdmmConfig
from run_logger import setup_logging
from spectral_solvers import METHODS

logger = logging.getLogger(__name__)


class BenchArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _label_column(value: str) -> Union[int, str]:
    try:
        return int(value)
    except ValueError:
        return value


def _add_admm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--rho', type=float, help='ADMM penalty (default BOUNDLDA_RHO or 100)')
    parser.add_argument('--eps-pri', type=float, help='Primal residual tolerance')
    parser.add_argument('--eps-dual', type=float, help='Dual residual tolerance')
    parser.add_argument('--it-max', type=int, help='Maximum ADMM iterations')
    parser.add_argument('--seed', type=int, help='Random seed')


def _admm_overrides(args: argparse.Namespace) -> dict:
    values = {
        'rho': args.rho,
        'eps_pri': args.eps_pri,
        'eps_dual': args.eps_dual,
        'it_max': args.it_max,
        'seed': args.seed,
    }
    return {k: v for k, v in values.items() if v is not None}


def _read(path: str, label_column: Union[int, str], raw: bool) -> LabeledDataset:
    data = load_csv(path, label_column=label_column)
    return data if raw else normalize_minmax(data)


def build_parser() -> argparse.ArgumentParser:
    parser = BenchArgumentParser(prog='boundlda', description='Bhattacharyya-bound discriminant analysis bench')
    parser.add_argument('--log-level', help='Logging level (default LOG_LEVEL or INFO)')
    sub = parser.add_subparsers(dest='cmd', required=True)

    p_fit = sub.add_parser('fit', help='Fit a projection on a CSV dataset')
    p_fit.add_argument('--data', required=True, help='CSV dataset')
    p_fit.add_argument('--label-column', type=_label_column, default=-1, help='Label column index or name')
    p_fit.add_argument('--method', required=True, choices=METHODS)
    p_fit.add_argument('--d', type=int, required=True, help='Target dimension')
    p_fit.add_argument('--output', required=True, help='Projection file to write')
    p_fit.add_argument('--trace', help='Write the L1BLDA iteration trace to this CSV')
    p_fit.add_argument('--raw', action='store_true', help='Skip min-max normalization')
    _add_admm_flags(p_fit)

    p_tr = sub.add_parser('transform', help='Apply a saved projection to a CSV dataset')
    p_tr.add_argument('--projection', required=True)
    p_tr.add_argument('--data', required=True)
    p_tr.add_argument('--label-column', type=_label_column, default=-1)
    p_tr.add_argument('--output', required=True, help='Projected CSV to write')
    p_tr.add_argument('--raw', action='store_true', help='Skip min-max normalization')

    p_ev = sub.add_parser('eval', help='1-NN accuracy of a saved projection')
    p_ev.add_argument('--projection', required=True)
    p_ev.add_argument('--train', required=True)
    p_ev.add_argument('--test', required=True)
    p_ev.add_argument('--label-column', type=_label_column, default=-1)
    p_ev.add_argument('--raw', action='store_true', help='Skip min-max normalization')

    p_bench = sub.add_parser('bench', help='Run a benchmark from a JSON config')
    p_bench.add_argument('--config', required=True, help='JSON RunConfig')
    p_bench.add_argument('--d-max', type=int, help='Cap on the swept dimension')
    p_bench.add_argument('--n-seeds', type=int, help='Number of random splits')
    p_bench.add_argument('--workers', type=int, help='Concurrent runs')
    p_bench.add_argument('--output', help='Report directory')
    p_bench.add_argument('--emit-trace', action='store_true', default=None, help='Write L1BLDA traces')
    _add_admm_flags(p_bench)

    p_syn = sub.add_parser('synth', help='Write a synthetic dataset as CSV')
    p_syn.add_argument('--kind', choices=SYNTH_KINDS, default='fig1')
    p_syn.add_argument('--seed', type=int, default=0)
    p_syn.add_argument('--with-outliers', action='store_true')
    p_syn.add_argument('--output', required=True)

    return parser


def run(args: argparse.Namespace) -> None:
    if args.cmd == 'fit':
        data = _read(args.data, args.label_column, args.raw)
        admm = AdmmConfig(**_admm_overrides(args)) if args.method == 'l1blda' else None
        projection = cmd_fit(data, args.method, args.d, args.output, admm=admm, trace_path=args.trace)
        print(f"{args.method} d={projection.d} objective={projection.objective!r} -> {args.output}")

    elif args.cmd == 'transform':
        data = _read(args.data, args.label_column, args.raw)
        projected = cmd_transform(args.projection, data, args.output)
        print(f"{projected.N} samples projected to {projected.n} dimensions -> {args.output}")

    elif args.cmd == 'eval':
        train = _read(args.train, args.label_column, args.raw)
        test = _read(args.test, args.label_column, args.raw)
        print(f"accuracy {cmd_eval(args.projection, train, test):.2f}%")

    elif args.cmd == 'bench':
        admm = _admm_overrides(args)
        admm.pop('seed', None)
        config = load_run_config(args.config, {
            'd_max': args.d_max,
            'n_seeds': args.n_seeds,
            'workers': args.workers,
            'seed': args.seed,
            'output': args.output,
            'emit_trace': args.emit_trace,
            'admm': admm,
        })
        report = cmd_bench(config)
        for name, path in report.files.items():
            print(f"{name}: {path}")
        if report.failures:
            print(f"{len(report.failures)} run(s) failed, see {report.files['failures']}")

    elif args.cmd == 'synth':
        data = cmd_synth(args.kind, args.seed, args.with_outliers, args.output)
        print(f"{data.name}: {data.N} samples -> {args.output}")


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level)
        run(args)
    except (ValueError, OSError) as e:
        # every BenchError is a ValueError, and so is a pydantic ValidationError
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
