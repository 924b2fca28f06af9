"""`stability` subcommand: sublevel-measure curve and exponent fit"""
import argparse
import logging

import pandas as pd

from topobreak.cli.commands.base import load_config, reporter_for
from topobreak.models.schemas import ExperimentConfig, RunManifest
from topobreak.services.config_loader import config_loader
from topobreak.services.geometry import geometry_service
from topobreak.services.seeding import derive_seed
from topobreak.services.stability import stability_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("stability", help="ρ 부분수준 측도 곡선과 α 추정")
    parser.set_defaults(handler=run, reps_field="stability.n_samples")


def cmd_stability(config: ExperimentConfig) -> RunManifest:
    """estimate_sublevel + fit_alpha + upper_bound_check"""
    M = config.generator.domain
    r = config.generator.r
    kind = config.filtration.kind
    dim_cap = config.filtration.dim_cap
    settings = config.stability

    reporter = reporter_for("stability", config)
    try:
        t_grid = stability_service.default_t_grid(M, settings.grid_per_decade, settings.grid_range)
        curve = stability_service.estimate_sublevel(
            kind, M, r, dim_cap, t_grid, settings.n_samples,
            derive_seed(config.seed, "stability"), config.threads,
        )
        reporter.write_csv("sublevel_curve.csv", pd.DataFrame({
            't': curve.t_grid,
            'p_hat': curve.p_hat,
            'stderr': curve.stderr,
        }))

        t_lo, t_hi = stability_service.default_window(M, settings.fit_window)
        fit = stability_service.fit_alpha(curve, t_lo, t_hi)
        target = stability_service.alpha_target(kind)
        check = stability_service.upper_bound_check(curve, target, t_lo, t_hi, settings.slack)
        results = {
            'alpha_hat': fit.alpha_hat,
            'alpha_stderr': fit.stderr,
            'alpha_target': target,
            'fit_points': fit.n_points,
            'upper_bound_passed': check.passed,
            'upper_bound_worst_ratio': check.worst_ratio,
        }
        reporter.write_json("alpha_fit.json", {
            'fit': fit.model_dump(),
            'upper_bound_check': check.model_dump(),
            'alpha_target': target,
        })
        logger.info("α̂ = %.4f (목표 %.2f, 점검 %s)", fit.alpha_hat, target, "통과" if check.passed else "실패")
    except Exception as e:
        reporter.fail(str(e))
        raise

    return reporter.finish(
        config_loader.to_dict(config),
        {
            'T': geometry_service.filtration_cap(kind, M),
            'c_star': geometry_service.gradient_bound(kind),
            'diameter': M.diameter,
            'fit_window': [t_lo, t_hi],
            'n_grid': len(t_grid),
        },
        results,
    )


def run(args: argparse.Namespace) -> RunManifest:
    return cmd_stability(load_config(args, args.reps_field))
