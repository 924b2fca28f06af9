"""`critvals` subcommand: simulated quantile tables of the limit laws"""
import argparse
import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from topobreak.cli.commands.base import load_config
from topobreak.config import BRIDGE_GRID, BRIDGE_REPS, DEFAULT_THREADS
from topobreak.exceptions import ConfigError
from topobreak.models.enums import Statistic
from topobreak.models.schemas import CritvalConfig, RunManifest
from topobreak.services.limit_law import limit_law_service
from topobreak.services.report_generator import RunReporter

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("critvals", help="Λ(ℓ)/Ω(ℓ) 임계값 표 시뮬레이션")
    parser.add_argument("--statistic", choices=[s.value for s in Statistic], default=None)
    parser.add_argument("--ell", type=int, default=None)
    parser.add_argument("--grid", type=int, default=None)
    parser.set_defaults(handler=run, reps_field="critvals.n_rep")


def cmd_critvals(
    statistic: Statistic,
    ell: int,
    n_rep: int,
    grid: int,
    seed: int,
    out: Path,
    threads: int = 1,
    run_id: Optional[str] = None,
) -> RunManifest:
    """분위수 CSV와 요약 JSON 작성 (같은 키는 캐시에서 재사용)"""
    statistic = Statistic(statistic)
    run_id = run_id or f"critvals-{statistic.value}-{ell}"
    reporter = RunReporter("critvals", run_id, Path(out), seed=seed).start()
    try:
        table = limit_law_service.table(statistic, ell, grid, n_rep, seed, threads)
        reporter.write_csv("quantiles.csv", limit_law_service.export_table(table))
        results = {
            'mean': table.mean,
            'variance': table.variance,
            **{f"q{level:g}": value for level, value in sorted(table.quantiles.items())},
        }
        if statistic == Statistic.LAMBDA and ell == 1:
            results['kolmogorov_reference_q0.95'] = limit_law_service.kolmogorov_reference_quantile(0.95)
        reporter.write_json("table_summary.json", {
            'statistic': statistic.value, 'ell': ell, 'grid': grid, 'n_rep': n_rep, 'seed': seed, **results,
        })
    except Exception as e:
        reporter.fail(str(e))
        raise

    return reporter.finish(
        {'statistic': statistic.value, 'ell': ell, 'grid': grid, 'n_rep': n_rep, 'seed': seed},
        {'quantile_levels': sorted(table.quantiles)},
        results,
    )


def run(args: argparse.Namespace) -> RunManifest:
    if args.config:
        config = load_config(args, args.reps_field)
        settings = config.critvals
        statistic = args.statistic or settings.statistic
        ell = args.ell if args.ell is not None else settings.ell
        grid = args.grid if args.grid is not None else settings.grid
        return cmd_critvals(statistic, ell, settings.n_rep, grid, config.seed,
                            Path(config.outputs), config.threads, config.run_id)

    try:
        settings = CritvalConfig(
            statistic=args.statistic or Statistic.LAMBDA,
            ell=args.ell if args.ell is not None else 1,
            grid=args.grid if args.grid is not None else BRIDGE_GRID,
            n_rep=args.reps if args.reps is not None else BRIDGE_REPS,
        )
    except ValidationError as e:
        raise ConfigError(f"critvals 인자 오류: {e.errors()[0]['loc'][0]} - {e.errors()[0]['msg']}") from e
    return cmd_critvals(
        settings.statistic, settings.ell, settings.n_rep, settings.grid,
        args.seed if args.seed is not None else 0,
        Path(args.out or "output/critvals"),
        args.threads or DEFAULT_THREADS,
    )
