"""
Command-line interface for the hybrid interface solver
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import argparse
import logging

import pandas as pd

from src.bench import apply_preset, run, run_stokes, solve_once, train
from src.config import DB_PATH, OUTPUT_DIR, ExperimentConfig, load_config, parse_sweep
from src.errors import InterfaceSolverError
from src.validation import run_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Neural-network / finite-difference hybrid solver for Poisson interface problems'
    )
    parser.add_argument('--log-level', type=str, default='WARNING',
                        help='Logging level (DEBUG, INFO, WARNING)')
    sub = parser.add_subparsers(dest='command', required=True)

    def experiment_args(p):
        p.add_argument('--config', type=str, default=None, help='INI experiment file')
        p.add_argument('--preset', type=str, default=None,
                       help='example1 ... example4, plateau or stokes')
        p.add_argument('--seed', type=int, default=None, help='Sampling and initialization seed')
        p.add_argument('--retrain', action='store_true', help='Retrain the network for every grid')
        p.add_argument('--dump-fields', action='store_true', help='Write u, v, w as .npz per grid')
        p.add_argument('--out', type=str, default=None, help=f'Output directory (default {OUTPUT_DIR})')
        p.add_argument('--db', type=str, default=None,
                       help=f"Run database (default {DB_PATH}, 'none' to disable)")
        p.add_argument('--max-epochs', type=int, default=None, help='LM epoch limit')

    p = sub.add_parser('train', help='Fit the jump network and save it')
    experiment_args(p)

    p = sub.add_parser('solve', help='Solve at one resolution')
    experiment_args(p)
    p.add_argument('--n', type=int, required=True, help='Cells per axis')
    p.add_argument('--net', type=str, default=None, help='Saved network file to reuse')

    for name, text in (('converge', 'Poisson mesh-refinement study'),
                       ('stokes', 'Stokes mesh-refinement study')):
        p = sub.add_parser(name, help=text)
        experiment_args(p)
        p.add_argument('--sweep', type=str, default=None, help="Grid sizes, e.g. '64,128,256'")
        p.add_argument('--timings', action='store_true', help='Include wall times in the CSV')

    sub.add_parser('validate', help='Run the oracle check suites')
    return parser


def resolve_config(args) -> ExperimentConfig:
    """Preset, then config file, then command-line overrides"""
    preset = args.preset or ('stokes' if args.command == 'stokes' else None)
    config = ExperimentConfig()
    if preset:
        apply_preset(config, preset)
    if args.config:
        config = load_config(args.config, base=config)
        if not args.preset and config.preset and config.preset != preset:
            config = load_config(args.config, base=apply_preset(ExperimentConfig(), config.preset))

    if args.seed is not None:
        config.seed = args.seed
    if args.retrain:
        config.retrain = True
    if args.dump_fields:
        config.dump_fields = True
    if args.out:
        config.out_dir = args.out
    if args.db:
        config.db_path = None if args.db.lower() == 'none' else args.db
    if args.max_epochs is not None:
        config.lm.max_epochs = args.max_epochs
    if getattr(args, 'sweep', None):
        config.sweep = parse_sweep(args.sweep)
    if getattr(args, 'timings', False):
        config.timings = True
    return config.validate()


def print_table(df: pd.DataFrame):
    with pd.option_context('display.float_format', '{:.3e}'.format, 'display.width', 160):
        print(df.to_string(index=False))


def cmd_train(config: ExperimentConfig) -> int:
    net, report, paths = train(config)
    marker = '✅' if report.converged else '❌'
    print(f"{marker} Trained m={net.width} k={net.n_outputs}: loss={report.final_loss:.3e} "
          f"after {report.epochs_used} epochs")
    print(f"Network saved to {paths['net']}")
    return 0


def cmd_solve(config: ExperimentConfig, n: int, net_path) -> int:
    sol, errors = solve_once(config, n, net_path)
    print(f"✅ Solved '{config.name}' at n={n} (h={sol.spec.h:.4g})")
    for key, value in errors.items():
        print(f"  {key:>10}: {value:.3e}")
    return 0


def cmd_converge(config: ExperimentConfig) -> int:
    result = run_stokes(config) if config.kind == 'stokes' else run(config)
    marker = '✅' if result.report.converged else '❌'
    print(f"{marker} Training loss {result.report.final_loss:.3e} "
          f"({result.report.epochs_used} epochs)")
    print_table(result.table.to_frame(timings=config.timings))
    print(f"\nTable written to {result.paths['table']}")
    if result.run_id:
        print(f"Run recorded as {result.run_id} in {config.db_path}")
    return 0


def cmd_validate() -> int:
    df = run_all()
    for _, row in df.iterrows():
        marker = '✅' if row['passed'] else '❌'
        print(f"{marker} {row['check']:<40} {row['value']:.2e} (tol {row['tolerance']:.0e})")
    failed = int((~df['passed']).sum())
    print(f"\n{len(df) - failed}/{len(df)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.WARNING),
        format='%(asctime)s %(name)s %(levelname)s: %(message)s',
    )
    try:
        if args.command == 'validate':
            return cmd_validate()
        config = resolve_config(args)
        if args.command == 'train':
            return cmd_train(config)
        if args.command == 'solve':
            return cmd_solve(config, args.n, args.net)
        if args.command == 'stokes' and config.kind != 'stokes':
            print("❌ The stokes command needs a Stokes experiment")
            return 1
        return cmd_converge(config)
    except (InterfaceSolverError, OSError) as exc:
        print(f"\n❌ {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
