"""Replication pipeline: clouds -> diagrams -> feature series"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from topobreak.exceptions import TopoBreakError
from topobreak.models.enums import TieBreak
from topobreak.models.schemas import (
    ExperimentConfig, FeatureVector, PersistenceDiagram, PointCloud, StatSeries
)
from topobreak.services.persistence import persistence_service
from topobreak.services.procgen import procgen_service
from topobreak.services.seeding import derive_seed, stream

logger = logging.getLogger(__name__)


def replication_seed(config: ExperimentConfig, replication: int) -> int:
    """복제 i의 시드는 (master seed, "replication", i)에만 의존"""
    return derive_seed(config.seed, "replication", replication)


class PipelineService:
    """설정 한 건의 복제 단위 계산"""

    def clouds(self, config: ExperimentConfig, replication: int) -> List[PointCloud]:
        seed = replication_seed(config, replication)
        if config.break_spec is not None:
            return procgen_service.inject_break(config.generator, config.break_spec, seed)
        return procgen_service.gen_series(config.generator, seed)

    def diagrams(
        self, config: ExperimentConfig, replication: int, clouds: Optional[List[PointCloud]] = None
    ) -> List[Tuple[PersistenceDiagram, FeatureVector]]:
        """시점별 (패딩된 다이어그램, Z_{k,t})"""
        if clouds is None:
            clouds = self.clouds(config, replication)
        seed = replication_seed(config, replication)
        seeded = config.test.tie_break == TieBreak.SEEDED_RANDOM
        out = []
        for t, x in enumerate(clouds, start=1):
            rng = stream(seed, "tie_break", t) if seeded else None
            diagram, z = persistence_service.cloud_features(
                x, config.filtration.kind, config.feature_dim, config.filtration.dim_cap,
                config.test.tie_break, rng,
            )
            out.append((diagram, z))
        return out

    def stat_series(self, config: ExperimentConfig, replication: int) -> StatSeries:
        """f(Z_{k,t}), t = 1..n"""
        try:
            features = self.diagrams(config, replication)
            rows = [persistence_service.feature_map(z, config.feature_map) for _, z in features]
            series = StatSeries(values=np.vstack(rows))
        except TopoBreakError as e:
            raise type(e)(f"[replication {replication}] {e}") from e
        logger.debug("복제 %d 특징 시계열 완료 (n=%d, ℓ=%d)", replication, series.n, series.ell)
        return series


# 싱글톤 인스턴스
pipeline_service = PipelineService()
