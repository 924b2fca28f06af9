"""Point-cloud time series with Bernoulli-shift structure"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from topobreak.config import DEFAULT_COUPLING_DELTA
from topobreak.exceptions import ConfigError, InputError
from topobreak.models.enums import (
    BreakKind, FiltrationKind, GeneratorKind, InnovationDist, TieBreak
)
from topobreak.models.schemas import (
    ApproxProfile, BreakSpec, CloudSeriesSpec, InnovationSpec, PointCloud
)
from topobreak.services.persistence import persistence_service
from topobreak.services.seeding import stream

logger = logging.getLogger(__name__)


class ProcgenService:
    """
    점구름 시계열 생성 서비스

    - IIDClouds: 시점마다 r개의 i.i.d. 점
    - DelayEmbedding: 절단 선형과정 Y_t = offset + Σ_{k≤K} a_k ε_{t−k} 의 지연좌표 (Y_t, ..., Y_{t−r+1})
    - M 밖으로 나간 좌표는 박스 사영(clip)으로 되돌림
    """

    def _innovation(self, spec: CloudSeriesSpec) -> InnovationSpec:
        if spec.innovation is not None:
            return spec.innovation
        d = spec.domain.d
        if spec.generator == GeneratorKind.IID_CLOUDS:
            return InnovationSpec.uniform(spec.domain.lo, spec.domain.hi)
        return InnovationSpec.uniform([-1.0] * d, [1.0] * d)

    def _draw(self, innovation: InnovationSpec, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        lo = np.asarray(innovation.lo, dtype=float)
        hi = np.asarray(innovation.hi, dtype=float)
        size = shape + (innovation.dim,)
        if innovation.dist == InnovationDist.UNIFORM_BOX:
            return rng.uniform(lo, hi, size=size)
        mean = np.asarray(innovation.mean, dtype=float)
        a = (lo - mean) / innovation.sd
        b = (hi - mean) / innovation.sd
        return stats.truncnorm.rvs(a, b, loc=mean, scale=innovation.sd, size=size, random_state=rng)

    # ------------------------------------------------------------------
    # 지연임베딩
    # ------------------------------------------------------------------

    def _lag_matrix(self, spec: CloudSeriesSpec, rng: np.random.Generator) -> np.ndarray:
        """L[t, lag] = ε_{t−lag},  lag = 0..K+r−1  →  (n, K+r, d)"""
        width = spec.burn_in + 1
        eps = self._draw(self._innovation(spec), rng, (spec.n + spec.burn_in,))
        windows = sliding_window_view(eps, width, axis=0)      # (n, d, width), 오래된 것부터
        return np.ascontiguousarray(np.moveaxis(windows, 2, 1)[:, ::-1, :])

    def _delay_clouds(self, spec: CloudSeriesSpec, lags: np.ndarray) -> np.ndarray:
        """X_{t,i} = offset + Σ_k a_k L[t, i+k]  →  (n, r, d), M으로 사영"""
        lp = spec.linear_process
        coeffs = lp.coefficients()
        K = lp.truncation_lag
        offset = spec.domain.center if lp.offset is None else np.asarray(lp.offset, dtype=float)
        clouds = np.empty((lags.shape[0], spec.r, spec.domain.d))
        for i in range(spec.r):
            clouds[:, i, :] = offset + np.einsum("k,tkd->td", coeffs, lags[:, i:i + K + 1, :])
        return spec.domain.clip(clouds)

    def _series_array(self, spec: CloudSeriesSpec, seed: int) -> np.ndarray:
        rng = stream(seed, "innovations")
        if spec.generator == GeneratorKind.IID_CLOUDS:
            draws = self._draw(self._innovation(spec), rng, (spec.n, spec.r))
            return spec.domain.clip(draws)
        return self._delay_clouds(spec, self._lag_matrix(spec, rng))

    def _to_clouds(self, spec: CloudSeriesSpec, array: np.ndarray) -> List[PointCloud]:
        return [PointCloud(points=cloud, domain=spec.domain) for cloud in array]

    def gen_series(self, spec: CloudSeriesSpec, seed: int) -> List[PointCloud]:
        """𝒳_t = F(ε_t, ε_{t−1}, ...),  t = 1..n (번인 폐기)"""
        return self._to_clouds(spec, self._series_array(spec, seed))

    # ------------------------------------------------------------------
    # m-의존 결합
    # ------------------------------------------------------------------

    def _coupled_arrays(self, spec: CloudSeriesSpec, m: int, seed: int,
                        lags: Optional[np.ndarray] = None,
                        copies: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        if m <= 0:
            raise InputError(f"m ≥ 1 이어야 합니다: {m}")
        if spec.generator == GeneratorKind.IID_CLOUDS:
            # 𝒳_t가 ε_t에만 의존하므로 모든 m ≥ 1에서 결합이 자명
            base = self._series_array(spec, seed)
            return base, base.copy()
        if lags is None:
            lags = self._lag_matrix(spec, stream(seed, "innovations"))
        if copies is None:
            copies = self._draw(self._innovation(spec), stream(seed, "coupling"), lags.shape[:2])
        lag_index = np.arange(lags.shape[1])[None, :, None]
        mixed = np.where(lag_index >= m, copies, lags)
        return self._delay_clouds(spec, lags), self._delay_clouds(spec, mixed)

    def gen_m_coupled(self, spec: CloudSeriesSpec, m: int, seed: int) -> List[Tuple[PointCloud, PointCloud]]:
        """(𝒳_t, 𝒳_t^{(m)}): 시차 ≥ m 인 혁신항을 시점별 독립 복제로 교체"""
        original, coupled = self._coupled_arrays(spec, m, seed)
        return list(zip(self._to_clouds(spec, original), self._to_clouds(spec, coupled)))

    def _weighted_sums(self, m_list: Sequence[int], nu: Sequence[float], p: float, alpha: float,
                       delta: float) -> List[float]:
        exponent = (1.0 + delta) * p / alpha
        terms = [m ** exponent * v for m, v in zip(m_list, nu)]
        return list(np.cumsum(terms))

    def approx_profile(
        self,
        spec: CloudSeriesSpec,
        p: float,
        m_list: Sequence[int],
        n_mc: int,
        seed: int,
        alpha: float = 1.0,
        delta: float = DEFAULT_COUPLING_DELTA,
    ) -> ApproxProfile:
        """ν̂_m = max_i E[‖X_{0,i} − X^{(m)}_{0,i}‖^p]^{1/p} (시간 평균으로 추정)"""
        if p < 1.0:
            raise InputError(f"p ≥ 1 이어야 합니다: {p}")
        m_list = sorted(int(m) for m in m_list)
        mc_spec = spec.model_copy(update={"n": n_mc})

        lags = copies = None
        if mc_spec.generator == GeneratorKind.DELAY_EMBEDDING:
            lags = self._lag_matrix(mc_spec, stream(seed, "innovations"))
            copies = self._draw(self._innovation(mc_spec), stream(seed, "coupling"), lags.shape[:2])

        nu_hat, stderr = [], []
        for m in m_list:
            original, coupled = self._coupled_arrays(mc_spec, m, seed, lags, copies)
            powered = np.linalg.norm(original - coupled, axis=2) ** p   # (n, r)
            moments = powered.mean(axis=0)
            worst = int(np.argmax(moments))
            moment = float(moments[worst])
            nu = moment ** (1.0 / p)
            se_moment = float(powered[:, worst].std(ddof=1) / math.sqrt(n_mc))
            se = (1.0 / p) * moment ** (1.0 / p - 1.0) * se_moment if moment > 0 else 0.0
            nu_hat.append(nu)
            stderr.append(se)
        logger.info("m-근사 프로파일 완료: %d개 m, n_mc=%d", len(m_list), n_mc)

        return ApproxProfile(
            m=m_list,
            nu_hat=nu_hat,
            stderr=stderr,
            weighted_partial_sums=self._weighted_sums(m_list, nu_hat, p, alpha, delta),
            p=p,
            alpha=alpha,
            delta=delta,
        )

    def feature_approx_profile(
        self,
        spec: CloudSeriesSpec,
        k: int,
        kind: FiltrationKind,
        dim_cap: int,
        p: float,
        m_list: Sequence[int],
        n_mc: int,
        seed: int,
        alpha: float = 1.0,
        delta: float = DEFAULT_COUPLING_DELTA,
    ) -> ApproxProfile:
        """특징 벡터 수준 E[‖Z_{k,0} − Z^{(m)}_{k,0}‖^p]^{1/p}"""
        if p < 1.0:
            raise InputError(f"p ≥ 1 이어야 합니다: {p}")
        m_list = sorted(int(m) for m in m_list)
        mc_spec = spec.model_copy(update={"n": n_mc})

        def features(clouds: np.ndarray) -> np.ndarray:
            return np.stack([
                persistence_service.cloud_features(
                    PointCloud(points=x, domain=mc_spec.domain), kind, k, dim_cap, TieBreak.DETERMINISTIC
                )[1].z
                for x in clouds
            ])

        nu_hat, stderr = [], []
        base: Optional[np.ndarray] = None
        for m in m_list:
            original, coupled = self._coupled_arrays(mc_spec, m, seed)
            if base is None:
                base = features(original)
            powered = np.linalg.norm(base - features(coupled), axis=1) ** p
            moment = float(powered.mean())
            nu_hat.append(moment ** (1.0 / p))
            se_moment = float(powered.std(ddof=1) / math.sqrt(n_mc))
            stderr.append((1.0 / p) * moment ** (1.0 / p - 1.0) * se_moment if moment > 0 else 0.0)

        return ApproxProfile(
            m=m_list,
            nu_hat=nu_hat,
            stderr=stderr,
            weighted_partial_sums=self._weighted_sums(m_list, nu_hat, p, alpha, delta),
            p=p,
            alpha=alpha,
            delta=delta,
        )

    # ------------------------------------------------------------------
    # 구조변화 주입
    # ------------------------------------------------------------------

    def inject_break(self, spec: CloudSeriesSpec, brk: BreakSpec, seed: int) -> List[PointCloud]:
        """t ≤ v* 는 기본 시계열, t > v* 는 변환된 시계열"""
        n = spec.n
        v_star = brk.change_index(n)
        if not 1 <= v_star < n:
            raise ConfigError(f"변화점 v*={v_star}가 [1, {n}) 범위를 벗어납니다.")

        array = self._series_array(spec, seed)
        post = array[v_star:]
        M = spec.domain
        if brk.kind == BreakKind.MEAN_SHIFT:
            delta = np.asarray(brk.delta, dtype=float)
            if delta.shape != (M.d,):
                raise ConfigError(f"delta 길이는 {M.d} 이어야 합니다.")
            if np.any(np.abs(delta) >= M.hi_array - M.lo_array):
                raise ConfigError("이동량이 M 밖으로 전체 질량을 밀어냅니다 (M ∩ (M + Δ) 내부가 비어 있음).")
            array[v_star:] = M.clip(post + delta)
        else:
            array[v_star:] = M.clip(M.center + brk.factor * (post - M.center))
        logger.debug("구조변화 주입: v*=%d, kind=%s", v_star, brk.kind.value)
        return self._to_clouds(spec, array)

    def export_series(self, series: Sequence[PointCloud]) -> pd.DataFrame:
        """시계열 CSV: t,point_index,coord_0..coord_{d−1}"""
        if not series:
            return pd.DataFrame(columns=['t', 'point_index'])
        stacked = np.stack([x.points for x in series])    # (n, r, d)
        n, r, d = stacked.shape
        frame = pd.DataFrame(stacked.reshape(n * r, d), columns=[f'coord_{j}' for j in range(d)])
        frame.insert(0, 'point_index', np.tile(np.arange(r), n))
        frame.insert(0, 't', np.repeat(np.arange(1, n + 1), r))
        return frame


# 싱글톤 인스턴스
procgen_service = ProcgenService()
