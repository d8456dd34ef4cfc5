"""
Command-line front end.

    unitrootmdp [--config run.yaml] [--seed N] [--workers N] [--out DIR]
                [--replicates N] [--log-level LEVEL] COMMAND

Commands: simulate, estimate, moments verify, curve, blocks check,
schedule check, clt. Exit codes: 0 success, 1 library error, 2 config
error, 3 verification failure, 4 inconclusive Monte Carlo.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import pandas as pd
from pydantic import ValidationError

from . import __version__
from .ar1 import path_frame, simulate
from .blocking import check_abcd, choose_p, falsify_maximal_bound
from .config import ExperimentConfig, load_config
from .estimators import estimate_summary
from .exceptions import (
    ConfigurationError,
    DegenerateRateError,
    InconclusiveError,
    InfeasibleBlockingError,
    ScheduleInvalidError,
    UnitRootMDPError,
)
from .models import StatisticKind, UWindow
from .montecarlo import MonteCarloEngine
from .umoments import verification_sweep
from .utils import stream_rng

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_VERIFY_FAILED = 3
EXIT_INCONCLUSIVE = 4

# Errors reported with EXIT_CONFIG; anything else is a library error
CONFIG_ERRORS = (ConfigurationError, ScheduleInvalidError, DegenerateRateError, ValidationError)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FLOAT_FORMAT = '%.17g'


def _output_dir(config: ExperimentConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f'wrote {len(frame)} rows to {path}')


def _write_summary(
    config: ExperimentConfig, command: str, results: dict[str, Any], stats: Optional[Any] = None
) -> Path:
    summary = {
        'command': command,
        'run_id': config.run_id(),
        'version': __version__,
        'config': config.model_dump(mode='json'),
        'results': results,
    }
    if stats is not None:
        summary['stats'] = stats.model_dump()
    path = _output_dir(config) / f"summary_{command.replace(' ', '_')}.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + '\n')
    return path


def cmd_simulate(config: ExperimentConfig) -> int:
    """Write one CSV of (k, X_k, xi_k) per simulated path."""
    spec = config.simulation
    model = config.noise_model()
    directory = _output_dir(config) / 'paths'
    directory.mkdir(exist_ok=True)
    files = []
    for replicate in range(spec.count):
        path = simulate(
            spec.theta,
            spec.n,
            model,
            stream_rng(config.master_seed, 0, replicate),
            init=config.init_policy,
            eps_init=config.eps_init,
        )
        target = directory / f'path_{replicate:04d}.csv'
        _write_csv(path_frame(path), target)
        files.append(str(target))
    _write_summary(config, 'simulate', {'files': files})
    return EXIT_OK


def cmd_estimate(config: ExperimentConfig) -> int:
    """Covariances, both estimators and the boundary ratio of one path, printed as JSON."""
    spec = config.simulation
    model = config.noise_model()
    path = simulate(
        spec.theta,
        spec.n,
        model,
        stream_rng(config.master_seed, 0, 0),
        init=config.init_policy,
        eps_init=config.eps_init,
    )
    rows = [estimate_summary(path, lag, model.second_moment) for lag in config.lags]
    print(json.dumps(rows, indent=2))
    _write_summary(config, 'estimate', {'estimates': rows})
    return EXIT_OK


def cmd_verify_moments(config: ExperimentConfig) -> int:
    """Closed forms against enumeration; exit 3 when any operational row fails."""
    spec = config.verify
    frame = verification_sweep(
        [law.build() for law in spec.laws],
        m_max_values=spec.m_max_values,
        m_offsets=spec.m_offsets,
        thetas=spec.thetas,
        tolerance=spec.tolerance,
        guard=spec.guard,
        block_guard=spec.block_guard,
    )
    _write_csv(frame, _output_dir(config) / 'moments_verify.csv')
    counts = {key: int(value) for key, value in frame['status'].value_counts().items()}
    _write_summary(config, 'moments verify', {'status_counts': counts})
    if counts.get('fail'):
        logger.error(f"{counts['fail']} moment rows disagree with enumeration")
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def _curve_lags(config: ExperimentConfig) -> list[int]:
    if config.kind in (StatisticKind.COVARIANCE, StatisticKind.APPROXIMANT):
        return list(config.lags)
    return [0]


def cmd_curve(config: ExperimentConfig) -> int:
    """Empirical rate curves over the schedule, one CSV per lag, plus a JSON summary."""
    schedule = config.build_schedule()
    engine = MonteCarloEngine(
        config.noise_model(),
        config.master_seed,
        config.workers,
        init_policy=config.init_policy,
        eps_init=config.eps_init,
        m_max=config.lag_bound(),
    )
    directory = _output_dir(config)
    diagnostics = {}
    for lag in _curve_lags(config):
        curves = engine.rate_curve(
            config.kind,
            schedule,
            config.r_grid,
            config.replicates,
            lag=lag,
            coefficients=config.coefficients,
        )
        rows = [row for curve in curves for row in curve.to_rows()]
        _write_csv(pd.DataFrame(rows), directory / f'curve_{config.kind.value}_l{lag}.csv')
        diagnostics[f'l{lag}'] = [curve.convergence_diagnostic() for curve in curves]
    _write_summary(config, 'curve', {'diagnostics': diagnostics}, engine.stats)
    return EXIT_OK


def cmd_blocks(config: ExperimentConfig) -> int:
    """Conditions (A)-(D) per point and lag; exit 4 when a Monte Carlo condition is unresolved."""
    schedule = config.build_schedule()
    model = config.noise_model()
    spec = config.blocking
    directory = _output_dir(config)
    rows = []
    inconclusive = False
    for point_id, point in enumerate(schedule.points):
        for lag in config.lags:
            window = UWindow.for_noise(model, point.m, point.theta, l=lag, m_max=config.lag_bound())
            report = check_abcd(
                point,
                window,
                model,
                tolerance=spec.tolerance,
                replicates=spec.condition_replicates,
                master_seed=config.master_seed,
                point_id=point_id,
                gamma_dep=spec.gamma_dep,
                condition_b_m=spec.condition_b_m,
                epsilon=spec.epsilon,
            )
            inconclusive = inconclusive or report.inconclusive
            for result in report.results:
                row = {'n': point.n, 'theta': point.theta, 'b': point.b, 'm': point.m}
                rows.append({**row, 'l': lag, 'p': report.p, **result.model_dump()})
    _write_csv(pd.DataFrame(rows), directory / 'blocks_check.csv')

    engine = MonteCarloEngine(
        model,
        config.master_seed,
        config.workers,
        init_policy=config.init_policy,
        eps_init=config.eps_init,
        m_max=config.lag_bound(),
    )
    variance = pd.concat(
        [
            engine.variance_convergence(schedule, lag, spec.variance_replicates)
            for lag in config.lags
        ],
        ignore_index=True,
    )
    _write_csv(variance, directory / 'variance_convergence.csv')

    if spec.negligibility_replicates:
        for lag in config.lags:
            boundary = engine.boundary_negligibility(
                schedule, lag, spec.negligibility_replicates, spec.negligibility_r
            )
            _write_csv(boundary, directory / f'boundary_l{lag}.csv')
            gap = engine.approximation_negligibility(
                schedule, lag, spec.negligibility_replicates, spec.negligibility_r
            )
            _write_csv(gap, directory / f'approx_gap_l{lag}.csv')

    results: dict[str, Any] = {'inconclusive': inconclusive}
    if spec.falsify_replicates:
        frame = falsify_maximal_bound(
            model,
            spec.falsify_n,
            spec.falsify_p,
            spec.t_values,
            alpha0=spec.alpha0,
            beta0=spec.beta0,
            replicates=spec.falsify_replicates,
            master_seed=config.master_seed,
        )
        _write_csv(frame, directory / 'maximal_bound.csv')
        results['maximal_bound_valid'] = bool(frame['valid'].all())
    _write_summary(config, 'blocks check', results, engine.stats)
    if inconclusive:
        raise InconclusiveError(
            'blocking conditions (B)/(C) unresolved within the replicate budget'
        )
    return EXIT_OK


def cmd_schedule(config: ExperimentConfig) -> int:
    """Condition table of the configured schedule with trend flags and super-block factors."""
    schedule = config.build_schedule()
    table = schedule.condition_table()
    factors = []
    for point in schedule.points:
        try:
            factors.append(choose_p(point.n, point.m, point.b, config.blocking.gamma_dep))
        except InfeasibleBlockingError:
            factors.append(None)
    table['p'] = factors
    _write_csv(table, _output_dir(config) / 'schedule_check.csv')
    trends = schedule.trends()
    print(table.to_csv(index=False, float_format=FLOAT_FORMAT), end='')
    _write_summary(config, 'schedule check', {'trends': trends})
    return EXIT_OK


def cmd_clt(config: ExperimentConfig) -> int:
    """Kolmogorov-Smirnov distance of the standardized LS error from N(0, 1)."""
    spec = config.clt
    engine = MonteCarloEngine(
        config.noise_model(),
        config.master_seed,
        config.workers,
        init_policy=config.init_policy,
        eps_init=config.eps_init,
    )
    report = engine.clt_check(spec.theta, spec.n, spec.replicates)
    frame = pd.DataFrame([report.model_dump()])
    _write_csv(frame, _output_dir(config) / 'clt.csv')
    print(frame.to_csv(index=False, float_format=FLOAT_FORMAT), end='')
    _write_summary(config, 'clt', report.model_dump(), engine.stats)
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Flags accepted before and after the command; sub-commands only set what they are given."""
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument('--config', type=Path, default=default, help='YAML config file')
    parser.add_argument(
        '--seed', type=int, default=default, help='Master seed (overrides file and environment)'
    )
    parser.add_argument('--workers', type=int, default=default, help='Worker processes')
    parser.add_argument('--out', type=Path, default=default, help='Output directory')
    parser.add_argument(
        '--replicates', type=int, default=default, help='Replicates per schedule point'
    )
    parser.add_argument(
        '--log-level',
        default=argparse.SUPPRESS if suppress else 'INFO',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='Logging level (default: INFO)',
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='unitrootmdp',
        description='Moderate deviation experiments for near-unit-root AR(1) models',
    )
    _add_common_flags(parser, suppress=False)
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    def leaf(subparsers, name: str, handler: Callable[[ExperimentConfig], int], help_text: str):
        sub = subparsers.add_parser(name, help=help_text)
        _add_common_flags(sub, suppress=True)
        sub.set_defaults(handler=handler)
        return sub

    leaf(commands, 'simulate', cmd_simulate, 'Write simulated paths as CSV')
    leaf(commands, 'estimate', cmd_estimate, 'Print covariance and estimator summaries')
    leaf(commands, 'curve', cmd_curve, 'Empirical MDP rate curves over the schedule')
    leaf(commands, 'clt', cmd_clt, 'Kolmogorov-Smirnov check of the LS CLT')

    for group, name, handler, help_text in (
        ('moments', 'verify', cmd_verify_moments, 'Closed-form moments against enumeration'),
        ('blocks', 'check', cmd_blocks, 'Blocking conditions (A)-(D)'),
        ('schedule', 'check', cmd_schedule, 'Schedule condition table'),
    ):
        sub = commands.add_parser(group, help=help_text)
        leaf(sub.add_subparsers(dest='action', required=True), name, handler, help_text)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """File and environment first, then the command-line flags."""
    config = load_config(args.config)
    return config.with_options(
        master_seed=args.seed,
        workers=args.workers,
        output_dir=args.out,
        replicates=args.replicates,
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    try:
        config = resolve_config(args)
        command = ' '.join(filter(None, (args.command, getattr(args, 'action', None))))
        logger.info(f'run {config.run_id()} command {command}')
        return args.handler(config)
    except InconclusiveError as exc:
        logger.warning(str(exc))
        return EXIT_INCONCLUSIVE
    except CONFIG_ERRORS as exc:
        print(f'configuration error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    except (UnitRootMDPError, OSError, ValueError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
