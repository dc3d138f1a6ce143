import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.config.logger import setup_logging
from src.config.settings import ConfigConstants, EnvSettings
from src.core.exceptions import ConfigError, DatasetError, PifError
from src.evaluation.metrics import agresti_coull_valid
from src.harness.config import ExperimentConfig, SweepConfig, load_config
from src.harness.reports import read_aggregate, write_report
from src.harness.runner import ExperimentReport, run_experiment, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NO_RESULTS = 1
EXIT_INVALID_CONFIG = 2


def _finish(report: ExperimentReport) -> int:
    missing = report.methods_without_results()
    if missing:
        logger.error(f"Methods without results: {', '.join(missing)}")
        return EXIT_NO_RESULTS
    return EXIT_OK


def command_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, ExperimentConfig)
    report = run_experiment(config)
    write_report(report, config.output_dir)
    return _finish(report)


def command_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config, SweepConfig)
    status = EXIT_OK
    for i, (learner, report) in enumerate(run_sweep(config)):
        write_report(report, Path(config.output_dir) / f"design_{i:03d}_{learner.label()}")
        status = max(status, _finish(report))
    return status


def command_validate(args: argparse.Namespace) -> int:
    """Agresti-Coull check of every method's pooled coverage in an aggregate report."""
    try:
        aggregate = read_aggregate(args.report)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read report {args.report}: {e}") from e
    status = EXIT_OK
    for label, entry in sorted(aggregate.get('methods', {}).items()):
        count = entry.get('pooled_count', 0)
        if not count:
            logger.error(f"{label}: no results to validate")
            status = EXIT_NO_RESULTS
            continue
        result = agresti_coull_valid(entry['pooled_hits'], count, args.nominal, args.alpha_test)
        verdict = 'valid' if result.valid else 'INVALID'
        logger.info(
            f"{label}: coverage {entry['pooled_hits'] / count:.4f} over {count} points, "
            f"CI [{result.ci_low:.4f}, {result.ci_high:.4f}] -> {verdict}"
        )
        if not result.valid:
            status = EXIT_NO_RESULTS
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pif', description='Prediction-interval experiments for regression.')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='run every configured method over repeated test splits')
    run.add_argument('--config', required=True, type=Path)
    run.set_defaults(handler=command_run)

    sweep = commands.add_parser('sweep', help='repeat an experiment over a learner hyperparameter grid')
    sweep.add_argument('--config', required=True, type=Path)
    sweep.set_defaults(handler=command_sweep)

    validate = commands.add_parser('validate', help='test pooled coverage against a nominal level')
    validate.add_argument('--report', required=True, type=Path)
    validate.add_argument('--nominal', required=True, type=float)
    validate.add_argument('--alpha-test', type=float, default=ConfigConstants.VALIDITY_ALPHA)
    validate.set_defaults(handler=command_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(EnvSettings.PIF_LOG_LEVEL)
    try:
        return args.handler(args)
    except (ConfigError, DatasetError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_INVALID_CONFIG
    except PifError as e:
        logger.error(f"Experiment failed: {e}", exc_info=True)
        return EXIT_NO_RESULTS


if __name__ == '__main__':
    sys.exit(main())
