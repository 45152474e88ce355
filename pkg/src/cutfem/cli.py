"""
Command-line interface for cutfem.
"""

import csv
import logging
import sys
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import ConfigError, load_config
from .experiments import CASES, NORMS, CaseResult, RunOptions, run_case

logger = logging.getLogger(__name__)

RESULT_HEADER = ['level', 'h', 'nno', 'dofs_full', 'dofs_reduced',
                 'err_l2', 'err_h1', 'err_h2', 'err_energy',
                 'eoc_l2', 'eoc_h1', 'eoc_h2', 'eoc_energy', 'cond_est']

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

OPTION_TYPES = {
    'levels': int, 'beta': float, 'gamma': float, 'order': int, 'depth': int, 'eps': float,
    'check': bool, 'out': str, 'verbose': bool, 'quiet': bool, 'large_threshold': float,
    'tau': float, 'final_time': float,
}


def _format(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return f"{value:.12e}"
    return str(value)


def _coerce(key: str, value: Any) -> Any:
    kind = OPTION_TYPES[key]
    if kind is bool:
        if isinstance(value, bool):
            return value
        if value in (0, 1):
            return bool(value)
        raise ConfigError(f"'{key}' needs a boolean, got {value!r}", 0)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"'{key}' needs a value of type {kind.__name__}, got {value!r}", 0)
    return value


def merge_options(args: argparse.Namespace) -> Dict[str, Any]:
    """Case defaults < config file < command-line flags."""
    merged: Dict[str, Any] = {}
    if getattr(args, 'config', None):
        for key, value in load_config(args.config).items():
            merged[key] = _coerce(key, value)
    for key in OPTION_TYPES:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value
    return merged


def write_results(result: CaseResult, out_dir: Path):
    eocs = result.eocs
    with open(out_dir / 'results.csv', 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(RESULT_HEADER)
        for i, row in enumerate(result.rows):
            writer.writerow([_format(v) for v in (
                row.level, row.h, row.nno, row.dofs_full, row.dofs_reduced,
                *(row.errors.get(name) for name in NORMS),
                *(eocs[name][i] for name in NORMS),
                row.cond_est,
            )])
    for name, (header, rows) in result.tables.items():
        with open(out_dir / name, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format(v) for v in row])


def write_plot(result: CaseResult, out_dir: Path):
    """Log-log errors against h with dashed reference slopes."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    h = [row.h for row in result.rows]
    for name in NORMS:
        points = [(hi, row.errors.get(name)) for hi, row in zip(h, result.rows)]
        points = [(x, y) for x, y in points if y is not None and y > 0.0]
        if len(points) < 2:
            continue
        xs, ys = zip(*points)
        line, = ax.loglog(xs, ys, marker='o', label=name)
        rate = result.expected_rates.get(name)
        if rate is not None:
            ref = [ys[-1] * (x / xs[-1]) ** rate for x in xs]
            ax.loglog(xs, ref, linestyle='--', color=line.get_color(), label=f"O({result.h_label}^{rate:g})")
    ax.set_xlabel(result.h_label)
    ax.set_ylabel('error')
    ax.set_title(result.case)
    if ax.lines:
        ax.legend()
    fig.savefig(out_dir / 'convergence.svg', format='svg', metadata={'Date': None})
    plt.close(fig)


def write_metadata(result: CaseResult, options: Dict[str, Any], out_dir: Path):
    from . import __version__
    lines = [f"case = {result.case}", f"version = {__version__}"]
    lines += [f"{key} = {value}" for key, value in sorted(options.items())]
    lines += [f"{key} = {value}" for key, value in result.metadata.items()]
    for check in result.checks:
        lines.append(f"check.{check.name} = {'pass' if check.passed else 'fail'} ({check.detail})")
    (out_dir / 'run.txt').write_text('\n'.join(lines) + '\n', encoding='utf-8')


def run_experiment(case: str, options: Dict[str, Any]) -> int:
    """
    Run one case and write its artifacts.

    Args:
        case: Name of a built-in case
        options: Merged run options (see OPTION_TYPES)

    Returns:
        Process exit code: 0 success, 2 failed check (with check set), 1 error
    """
    try:
        run_options = RunOptions(**{k: v for k, v in options.items()
                                    if k in RunOptions.__dataclass_fields__})
        result = run_case(case, run_options)
        out_dir = Path(options.get('out') or f"results/{case}")
        out_dir.mkdir(parents=True, exist_ok=True)
        write_results(result, out_dir)
        write_plot(result, out_dir)
        write_metadata(result, options, out_dir)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.debug("run failed", exc_info=True)
        return EXIT_ERROR

    for check in result.checks:
        logger.info("check %s: %s (%s)", check.name, 'pass' if check.passed else 'FAIL', check.detail)
    print(f"Wrote {case} results to {out_dir}")
    if options.get('check') and not result.passed:
        failed = ', '.join(c.name for c in result.checks if not c.passed)
        print(f"Acceptance checks failed: {failed}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='cutfem - cut finite elements with a discrete extension operator',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  cutfem run poisson --levels 4 --beta 100 --check
  cutfem run sliver --eps 1e-8
  cutfem run biharmonic --config plate.cfg --out results/plate
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    run_parser = subparsers.add_parser('run', help='Run a built-in study')
    run_parser.add_argument('case', help=f"Study to run ({', '.join(CASES)})")
    run_parser.add_argument('--levels', type=int, help='Number of refinement levels (>= 2)')
    run_parser.add_argument('--beta', type=float, help='Nitsche penalty')
    run_parser.add_argument('--gamma', type=float, help='Secondary penalty (biharmonic)')
    run_parser.add_argument('--order', type=int, help='Polynomial degree; 1, 2 Lagrange, 3, 5 Hermite')
    run_parser.add_argument('--depth', type=int, help='Quadtree depth of cut-cell quadrature')
    run_parser.add_argument('--eps', type=float, help='Smallest sliver offset in the sliver sweep')
    run_parser.add_argument('--large-threshold', dest='large_threshold', type=float,
                            help='Treat cut cells with |T & Omega| >= t |T| as interior')
    run_parser.add_argument('--tau', type=float, help='Coarsest time step (heat)')
    run_parser.add_argument('--final-time', dest='final_time', type=float, help='Final time (heat)')
    run_parser.add_argument('--check', action='store_true', help='Exit with 2 when acceptance checks fail')
    run_parser.add_argument('--out', help='Output directory (default results/<case>)')
    run_parser.add_argument('--config', help='Flat key = value options file')
    run_parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    run_parser.add_argument('-q', '--quiet', action='store_true', help='Warnings only')

    subparsers.add_parser('version', help='Show version information')
    return parser


def configure_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)


def main(argv: Optional[List[str]] = None):
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'run':
        try:
            options = merge_options(args)
        except ConfigError as e:
            print(f"Config error: {e}", file=sys.stderr)
            sys.exit(EXIT_ERROR)
        configure_logging(options.get('verbose', False), options.get('quiet', False))
        sys.exit(run_experiment(args.case, options))

    elif args.command == 'version':
        from . import __version__
        print(f"cutfem v{__version__}")
        sys.exit(0)

    else:
        parser.print_help()
        sys.exit(1)


if __name__ == '__main__':
    main()
