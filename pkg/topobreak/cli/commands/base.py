"""Helpers shared by the CLI subcommands"""
import argparse
from pathlib import Path

from topobreak.exceptions import ConfigError
from topobreak.models.schemas import ExperimentConfig
from topobreak.services.config_loader import config_loader
from topobreak.services.report_generator import RunReporter


def load_config(args: argparse.Namespace, reps_field: str = "replications") -> ExperimentConfig:
    """--config 파일 로드 후 --seed/--reps/--out/--threads 적용"""
    if not args.config:
        raise ConfigError(f"'{args.command}' 명령에는 --config 가 필요합니다.")
    config = config_loader.load(args.config)
    return config_loader.apply_overrides(
        config, seed=args.seed, reps=args.reps, out=args.out, threads=args.threads,
        reps_field=reps_field,
    )


def reporter_for(command: str, config: ExperimentConfig) -> RunReporter:
    return RunReporter(command, config.run_id, Path(config.outputs), seed=config.seed).start()
