"""Brownian-bridge limit laws of the CUSUM statistics and their cache"""
import logging
import math
import threading
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats
from scipy.integrate import trapezoid

from topobreak.config import BRIDGE_CHUNK, CACHE_DB_PATH, QUANTILE_LEVELS
from topobreak.exceptions import InputError
from topobreak.models.database import LimitLawTable, get_session
from topobreak.models.enums import Statistic
from topobreak.models.schemas import QuantileTable
from topobreak.services.seeding import stream

logger = logging.getLogger(__name__)

CacheKey = Tuple[str, int, int, int, int]


class LimitLawCache:
    """
    분위수 표 캐시 (메모리 + SQLite)

    쓰기는 잠금으로 직렬화, 읽기는 잠금 없이 메모리 사전 조회 후 DB 조회.
    """

    def __init__(self, db_path: Optional[str] = CACHE_DB_PATH):
        self.db_path = db_path or None
        self._memory: Dict[CacheKey, QuantileTable] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(statistic: Statistic, ell: int, grid: int, n_rep: int, seed: int) -> CacheKey:
        return (Statistic(statistic).value, int(ell), int(grid), int(n_rep), int(seed))

    def get(self, key: CacheKey) -> Optional[QuantileTable]:
        table = self._memory.get(key)
        if table is not None or self.db_path is None:
            return table

        session = get_session(self.db_path)
        try:
            row = session.query(LimitLawTable).filter_by(
                statistic=key[0], ell=key[1], grid=key[2], n_rep=key[3], seed=str(key[4])
            ).first()
            if row is None:
                return None
            table = QuantileTable(
                statistic=Statistic(row.statistic),
                ell=row.ell,
                grid=row.grid,
                n_rep=row.n_rep,
                seed=int(row.seed),
                quantiles={float(level): value for level, value in row.quantiles.items()},
                mean=row.mean,
                variance=row.variance,
                samples=np.asarray(row.samples, dtype=float),
            )
        finally:
            session.close()
        with self._lock:
            self._memory.setdefault(key, table)
        return table

    def put(self, table: QuantileTable) -> None:
        key = self.key(table.statistic, table.ell, table.grid, table.n_rep, table.seed)
        with self._lock:
            self._memory[key] = table
            if self.db_path is None:
                return
            session = get_session(self.db_path)
            try:
                exists = session.query(LimitLawTable.id).filter_by(
                    statistic=key[0], ell=key[1], grid=key[2], n_rep=key[3], seed=str(key[4])
                ).first()
                if exists is None:
                    session.add(LimitLawTable(
                        statistic=key[0],
                        ell=key[1],
                        grid=key[2],
                        n_rep=key[3],
                        seed=str(key[4]),
                        quantiles={str(level): value for level, value in table.quantiles.items()},
                        mean=table.mean,
                        variance=table.variance,
                        samples=table.samples.tolist(),
                    ))
                    session.commit()
            except Exception:
                session.rollback()
                raise
            finally:
                session.close()


class LimitLawService:
    """Λ(ℓ) = sup_t Σ B_i²(t),  Ω(ℓ) = Σ ∫ B_i²(t) dt"""

    def __init__(self, cache: Optional[LimitLawCache] = None):
        self.cache = cache if cache is not None else LimitLawCache()

    def _bridge_energy(self, ell: int, grid: int, size: int, seed: int, chunk: int) -> np.ndarray:
        """
        Σ_i B_i²(t_j), j = 0..grid  →  (size, grid+1)

        성분 i의 브리지는 (seed, chunk, i) 스트림에서 생성되므로 ℓ이 늘어도 기존 성분은 동일하다.
        """
        t = np.linspace(0.0, 1.0, grid + 1)
        acc = np.zeros((size, grid + 1))
        for i in range(ell):
            rng = stream(seed, "bridge", chunk, i)
            increments = rng.standard_normal((size, grid)) / math.sqrt(grid)
            W = np.concatenate([np.zeros((size, 1)), np.cumsum(increments, axis=1)], axis=1)
            B = W - t * W[:, -1:]
            acc += B * B
        return acc

    @staticmethod
    def _reduce(acc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        grid = acc.shape[1] - 1
        return acc.max(axis=1), trapezoid(acc, dx=1.0 / grid, axis=1)

    def _chunk_statistics(self, ell: int, grid: int, size: int, seed: int, chunk: int) -> Tuple[np.ndarray, np.ndarray]:
        """청크 하나의 (Λ, Ω) 표본"""
        return self._reduce(self._bridge_energy(ell, grid, size, seed, chunk))

    def _chunk_paired(self, ell: int, grid: int, size: int, seed: int, chunk: int) -> Tuple[np.ndarray, np.ndarray]:
        """2·grid 격자와 그 짝수 번째 부분격자에서 같은 경로의 (Λ, Ω) → ((2, size), (2, size))"""
        acc = self._bridge_energy(ell, 2 * grid, size, seed, chunk)
        fine, coarse = self._reduce(acc), self._reduce(acc[:, ::2])
        return np.stack([fine[0], coarse[0]]), np.stack([fine[1], coarse[1]])

    @staticmethod
    def _chunk_sizes(n_rep: int) -> List[int]:
        sizes = [BRIDGE_CHUNK] * (n_rep // BRIDGE_CHUNK)
        if n_rep % BRIDGE_CHUNK:
            sizes.append(n_rep % BRIDGE_CHUNK)
        return sizes

    @staticmethod
    def _check_sizes(ell: int, grid: int, n_rep: int) -> None:
        if ell < 1 or grid < 1000 or n_rep < 1000:
            raise InputError(f"ell ≥ 1, grid ≥ 1000, n_rep ≥ 1000 이어야 합니다: ell={ell}, grid={grid}, n_rep={n_rep}")

    def simulate_limit_law(
        self,
        statistic: Statistic,
        ell: int,
        grid: int,
        n_rep: int,
        seed: int,
        threads: int = 1,
        levels: Sequence[float] = QUANTILE_LEVELS,
    ) -> QuantileTable:
        """ℓ개 독립 브라운 브리지로 한계분포 분위수 표 생성"""
        statistic = Statistic(statistic)
        self._check_sizes(ell, grid, n_rep)

        parts = Parallel(n_jobs=threads)(
            delayed(self._chunk_statistics)(ell, grid, size, seed, i)
            for i, size in enumerate(self._chunk_sizes(n_rep))
        )
        column = 0 if statistic == Statistic.LAMBDA else 1
        samples = np.sort(np.concatenate([part[column] for part in parts]))

        quantiles = {float(level): float(np.quantile(samples, level)) for level in levels}
        logger.info("한계분포 시뮬레이션 완료: %s(ℓ=%d), grid=%d, n_rep=%d", statistic.value, ell, grid, n_rep)
        return QuantileTable(
            statistic=statistic,
            ell=ell,
            grid=grid,
            n_rep=n_rep,
            seed=seed,
            quantiles=quantiles,
            mean=float(samples.mean()),
            variance=float(samples.var(ddof=1)) if n_rep > 1 else 0.0,
            samples=samples,
        )

    def grid_doubling_shift(
        self,
        statistic: Statistic,
        ell: int,
        grid: int,
        n_rep: int,
        seed: int,
        threads: int = 1,
        level: float = 0.95,
    ) -> float:
        """
        격자 2배 시 분위수 이동량 |q(2·grid) − q(grid)|

        2·grid 경로와 그 짝수 번째 점만 남긴 경로를 비교한다.
        """
        statistic = Statistic(statistic)
        self._check_sizes(ell, grid, n_rep)
        parts = Parallel(n_jobs=threads)(
            delayed(self._chunk_paired)(ell, grid, size, seed, i)
            for i, size in enumerate(self._chunk_sizes(n_rep))
        )
        column = 0 if statistic == Statistic.LAMBDA else 1
        samples = np.concatenate([part[column] for part in parts], axis=1)
        fine, coarse = np.quantile(samples, level, axis=1)
        logger.info("격자 2배 이동량 %s(ℓ=%d): %.4g", statistic.value, ell, abs(fine - coarse))
        return float(abs(fine - coarse))

    def table(self, statistic: Statistic, ell: int, grid: int, n_rep: int, seed: int,
              threads: int = 1) -> QuantileTable:
        """캐시 우선 조회, 없으면 시뮬레이션 후 저장"""
        key = self.cache.key(statistic, ell, grid, n_rep, seed)
        cached = self.cache.get(key)
        if cached is not None:
            logger.debug("한계분포 캐시 적중: %s", key)
            return cached
        table = self.simulate_limit_law(statistic, ell, grid, n_rep, seed, threads)
        self.cache.put(table)
        return table

    def _normal_moments(self, statistic: Statistic, ell: int) -> Tuple[float, float]:
        if Statistic(statistic) == Statistic.LAMBDA:
            return ell / 4.0, math.sqrt(ell / 8.0)
        return ell / 6.0, math.sqrt(ell / 45.0)

    def normal_approx_cv(self, statistic: Statistic, ell: int, level: float) -> float:
        """ℓ → ∞ 정규근사 임계값 (level = 분위수 수준)"""
        if ell < 1:
            raise InputError(f"ell ≥ 1 이어야 합니다: {ell}")
        if not 0.0 < level < 1.0:
            raise InputError(f"level은 (0,1) 범위여야 합니다: {level}")
        mean, sd = self._normal_moments(statistic, ell)
        return mean + float(stats.norm.ppf(level)) * sd

    def normal_p_value(self, statistic: Statistic, ell: int, value: float) -> float:
        mean, sd = self._normal_moments(statistic, ell)
        return float(stats.norm.sf((value - mean) / sd))

    def kolmogorov_reference_quantile(self, level: float) -> float:
        """Λ(1) = sup|B|² 의 정확한 분위수 (Kolmogorov 분포)"""
        return float(stats.kstwobign.ppf(level)) ** 2

    def export_table(self, table: QuantileTable) -> pd.DataFrame:
        """분위수 CSV: statistic,ell,level,quantile,n_rep,grid,seed"""
        return pd.DataFrame([
            {
                'statistic': table.statistic.value,
                'ell': table.ell,
                'level': level,
                'quantile': value,
                'n_rep': table.n_rep,
                'grid': table.grid,
                'seed': table.seed,
            }
            for level, value in sorted(table.quantiles.items())
        ])


# 싱글톤 인스턴스
limit_law_service = LimitLawService()
