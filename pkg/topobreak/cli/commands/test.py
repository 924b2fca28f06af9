"""`test` subcommand: full detection pipeline over replications"""
import argparse
import logging
from typing import Any, Dict, List

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from topobreak.cli.commands.base import load_config, reporter_for
from topobreak.exceptions import TopoBreakError
from topobreak.models.enums import Statistic
from topobreak.models.schemas import ExperimentConfig, RunManifest, StatSeries
from topobreak.services.changepoint import changepoint_service
from topobreak.services.config_loader import config_loader
from topobreak.services.geometry import geometry_service
from topobreak.services.limit_law import limit_law_service
from topobreak.services.persistence import n_features
from topobreak.services.pipeline import pipeline_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("test", help="구조변화 검정 (생성 → 다이어그램 → 특징 → CUSUM)")
    parser.set_defaults(handler=run, reps_field="replications")


def _replication_rows(config: ExperimentConfig, replication: int, series: StatSeries) -> List[Dict[str, Any]]:
    """복제 하나의 통계량별 결과 행"""
    settings = config.test
    estimate = None
    try:
        if settings.estimate_changepoint:
            estimate = changepoint_service.estimate_changepoint(series, settings.weighting, bandwidth=settings.bandwidth)
        rows = []
        for statistic in settings.statistics:
            result = changepoint_service.run_test(
                series, statistic, settings.level, settings.cv_method, settings.bandwidth,
                settings.grid, settings.n_rep, config.seed, config.threads,
            )
            row = {'replication': replication, **result.model_dump(mode="json")}
            if estimate is not None:
                row['v_hat'] = estimate.v_hat
                row['theta_hat'] = estimate.theta_hat
                if config.break_spec is not None:
                    row['theta_error'] = abs(estimate.theta_hat - config.break_spec.theta)
            rows.append(row)
    except TopoBreakError as e:
        raise type(e)(f"[replication {replication}] {e}") from e
    return rows


def _aggregate(config: ExperimentConfig, frame: pd.DataFrame) -> Dict[str, Any]:
    """통계량별 기각률, |θ̂ − θ| 중앙값"""
    summary: Dict[str, Any] = {'replications': config.replications, 'level': config.test.level}
    for statistic, group in frame.groupby('statistic', sort=True):
        summary[f'rejection_rate_{statistic}'] = float(group['reject'].mean())
    if 'theta_error' in frame:
        errors = frame.drop_duplicates('replication')['theta_error']
        summary['median_abs_theta_error'] = float(np.median(errors))
    return summary


def cmd_test(config: ExperimentConfig) -> RunManifest:
    """
    특징 시계열 계산은 복제별로 병렬 처리하고, 임계값 표는 주 프로세스에서 1회 시뮬레이션 후 캐시한다.
    """
    reporter = reporter_for("test", config)
    try:
        series_list = Parallel(n_jobs=config.threads)(
            delayed(pipeline_service.stat_series)(config, i) for i in range(config.replications)
        )
        rows = [
            row
            for i, series in enumerate(series_list)
            for row in _replication_rows(config, i, series)
        ]
        frame = pd.DataFrame(rows)
        reporter.write_csv("replications.csv", frame)
        summary = _aggregate(config, frame)
        reporter.write_json("aggregate.json", summary)
        reporter.write_json("test_results.json", {'results': rows})

        k = config.feature_dim
        kind = config.filtration.kind
        first = series_list[0]
        lrc = changepoint_service.long_run_cov(first, config.test.bandwidth)
        derived = {
            'N_k': n_features(config.generator.r, k),
            'T': geometry_service.filtration_cap(kind, config.generator.domain),
            'c_star': geometry_service.gradient_bound(kind),
            'ell': first.ell,
            'bandwidth': lrc.bandwidth,
            'ridge_applied': bool(frame['ridge_applied'].any()),
        }
        if config.break_spec is not None:
            derived['v_star'] = config.break_spec.change_index(config.generator.n)
        if first.ell == 1 and Statistic.LAMBDA in config.test.statistics:
            derived['kolmogorov_reference_quantile'] = limit_law_service.kolmogorov_reference_quantile(
                1.0 - config.test.level
            )
    except Exception as e:
        reporter.fail(str(e))
        raise

    logger.info("검정 완료: %s", ", ".join(f"{key}={value}" for key, value in summary.items()))
    return reporter.finish(config_loader.to_dict(config), derived, summary)


def run(args: argparse.Namespace) -> RunManifest:
    return cmd_test(load_config(args, args.reps_field))
