"""`approx` subcommand: m-approximation profile of the cloud series"""
import argparse
import logging
from typing import List, Optional

import numpy as np
import pandas as pd

from topobreak.cli.commands.base import load_config, reporter_for
from topobreak.exceptions import InputError
from topobreak.models.enums import GeneratorKind
from topobreak.models.schemas import ApproxProfile, ExperimentConfig, RunManifest
from topobreak.services.config_loader import config_loader
from topobreak.services.procgen import procgen_service
from topobreak.services.seeding import derive_seed

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("approx", help="결합 불일치 ν̂_m 프로파일")
    parser.add_argument("--p", type=float, default=None, help="모멘트 차수 (≥ 1)")
    parser.add_argument("--m-list", type=str, default=None, help="쉼표로 구분한 m 목록 (예: 1,2,4,8)")
    parser.set_defaults(handler=run, reps_field="approx.n_mc")


def _parse_m_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InputError(f"--m-list 형식이 잘못되었습니다: {text}") from e
    if not values or min(values) < 1:
        raise InputError(f"m은 1 이상의 정수여야 합니다: {text}")
    return values


def _profile_frame(profile: ApproxProfile, level: str) -> pd.DataFrame:
    return pd.DataFrame({
        'level': level,
        'm': profile.m,
        'nu_hat': profile.nu_hat,
        'stderr': profile.stderr,
        'weighted_partial_sum': profile.weighted_partial_sums,
    })


def _non_increasing(profile: ApproxProfile, tolerance: float = 2.0) -> bool:
    """ν̂_m이 표준오차 2배 이내에서 비증가"""
    nu = np.asarray(profile.nu_hat)
    se = np.asarray(profile.stderr)
    rises = nu[1:] - nu[:-1]
    return bool(np.all(rises <= tolerance * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)))


def cmd_approx(config: ExperimentConfig, p: Optional[float] = None,
               m_list: Optional[List[int]] = None) -> RunManifest:
    settings = config.approx
    p = settings.p if p is None else p
    m_list = settings.m_list if m_list is None else m_list
    spec = config.generator
    seed = derive_seed(config.seed, "approx")

    reporter = reporter_for("approx", config)
    try:
        profile = procgen_service.approx_profile(
            spec, p, m_list, settings.n_mc, seed, settings.alpha, settings.delta
        )
        frames = [_profile_frame(profile, "cloud")]
        results = {
            'p': p,
            'n_mc': settings.n_mc,
            'non_increasing_within_2se': _non_increasing(profile),
            'last_decade_increment': profile.last_decade_increment,
        }
        if spec.generator == GeneratorKind.DELAY_EMBEDDING:
            horizon = spec.linear_process.truncation_lag + spec.r
            beyond = [nu for m, nu in zip(profile.m, profile.nu_hat) if m >= horizon]
            results['coupling_horizon'] = horizon
            results['zero_beyond_horizon'] = all(nu == 0.0 for nu in beyond)

        if settings.feature_level:
            feature_profile = procgen_service.feature_approx_profile(
                spec, config.feature_dim, config.filtration.kind, config.filtration.dim_cap,
                p, m_list, settings.n_mc, seed, settings.alpha, settings.delta,
            )
            frames.append(_profile_frame(feature_profile, "feature"))
            results['feature_last_decade_increment'] = feature_profile.last_decade_increment

        reporter.write_csv("approx_profile.csv", pd.concat(frames, ignore_index=True))
        reporter.write_json("approx_summary.json", results)
    except Exception as e:
        reporter.fail(str(e))
        raise

    return reporter.finish(
        config_loader.to_dict(config),
        {'weight_exponent': (1.0 + settings.delta) * p / settings.alpha, 'burn_in': spec.burn_in},
        results,
    )


def run(args: argparse.Namespace) -> RunManifest:
    config = load_config(args, args.reps_field)
    m_list = _parse_m_list(args.m_list) if args.m_list else None
    return cmd_approx(config, args.p, m_list)
