"""Experiment configuration loading and serialization"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from topobreak.exceptions import ConfigError
from topobreak.models.schemas import ExperimentConfig

logger = logging.getLogger(__name__)


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


class ConfigLoader:
    """JSON 실험 설정 파싱/검증/직렬화"""

    def parse(self, text: str, source: str = "<string>") -> ExperimentConfig:
        """텍스트 → ExperimentConfig (오류 시 줄/열 또는 필드 경로 포함)"""
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{source}:{e.lineno}:{e.colno}: JSON 파싱 오류 - {e.msg}") from e
        return self.validate(raw, source)

    def validate(self, raw: Any, source: str = "<dict>") -> ExperimentConfig:
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: 최상위 값은 객체여야 합니다.")
        try:
            return ExperimentConfig.model_validate(raw)
        except ValidationError as e:
            details = "; ".join(
                f"{_field_path(err['loc'])}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"{source}: 설정 검증 실패 - {details}") from e

    def load(self, path: Union[str, Path]) -> ExperimentConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError as e:
            raise ConfigError(f"설정 파일을 찾을 수 없습니다: {path}") from e
        config = self.parse(text, str(path))
        logger.info("설정 로드: %s (run_id=%s)", path, config.run_id)
        return config

    def to_dict(self, config: ExperimentConfig) -> Dict[str, Any]:
        return config.model_dump(mode="json", by_alias=True)

    def dump(self, config: ExperimentConfig) -> str:
        """parse(dump(c)) == c"""
        return json.dumps(self.to_dict(config), ensure_ascii=False, indent=2)

    def apply_overrides(
        self,
        config: ExperimentConfig,
        seed: Optional[int] = None,
        reps: Optional[int] = None,
        out: Optional[str] = None,
        threads: Optional[int] = None,
        reps_field: str = "replications",
    ) -> ExperimentConfig:
        """
        CLI 플래그 우선 적용 후 재검증

        reps_field는 점 표기 경로 (예: "stability.n_samples", "approx.n_mc").
        """
        raw = self.to_dict(config)
        if seed is not None:
            raw["seed"] = seed
        if reps is not None:
            *parents, leaf = reps_field.split(".")
            target = raw
            for key in parents:
                target = target.setdefault(key, {})
            target[leaf] = reps
        if out is not None:
            raw["outputs"] = out
        if threads is not None:
            raw["threads"] = threads
        return self.validate(raw, "<overrides>")


# 싱글톤 인스턴스
config_loader = ConfigLoader()
