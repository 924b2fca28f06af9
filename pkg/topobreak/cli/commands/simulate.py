"""`simulate` subcommand: dump one replication's series and diagrams"""
import argparse
import logging

from topobreak.cli.commands.base import load_config, reporter_for
from topobreak.models.schemas import ExperimentConfig, RunManifest
from topobreak.services.config_loader import config_loader
from topobreak.services.persistence import n_features, persistence_service
from topobreak.services.pipeline import pipeline_service, replication_seed
from topobreak.services.procgen import procgen_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="시계열/다이어그램 CSV 출력 (검정 없음)")
    parser.add_argument("--replication", type=int, default=0, help="출력할 복제 번호")
    parser.set_defaults(handler=run, reps_field="replications")


def cmd_simulate(config: ExperimentConfig, replication: int = 0) -> RunManifest:
    reporter = reporter_for("simulate", config)
    try:
        clouds = pipeline_service.clouds(config, replication)
        reporter.write_csv("series.csv", procgen_service.export_series(clouds))
        diagrams = pipeline_service.diagrams(config, replication, clouds)
        reporter.write_csv(
            "diagrams.csv",
            persistence_service.export_diagrams([(t, d) for t, (d, _) in enumerate(diagrams, start=1)]),
        )
    except Exception as e:
        reporter.fail(str(e))
        raise

    return reporter.finish(
        config_loader.to_dict(config),
        {
            'replication': replication,
            'replication_seed': str(replication_seed(config, replication)),
            'N_k': n_features(config.generator.r, config.feature_dim),
        },
        {'n': len(clouds), 'nontrivial_pairs': sum(d.n_nontrivial for d, _ in diagrams)},
    )


def run(args: argparse.Namespace) -> RunManifest:
    config = load_config(args, args.reps_field)
    return cmd_simulate(config, args.replication)
