"""Stability functional ρ proxies and the sublevel-measure exponent α"""
import logging
import math
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from topobreak.config import (
    STABILITY_CHUNK, STABILITY_FIT_WINDOW, STABILITY_GRID_PER_DECADE,
    STABILITY_GRID_RANGE, STABILITY_MIN_SAMPLES, UPPER_BOUND_SLACK
)
from topobreak.exceptions import EstimationError, InputError
from topobreak.models.enums import FiltrationKind, RhoKind
from topobreak.models.schemas import (
    AlphaFit, DomainM, PointCloud, RhoEstimate, SublevelCurve, UpperBoundCheck
)
from topobreak.services.geometry import geometry_service, pairwise_distances
from topobreak.services.seeding import stream

logger = logging.getLogger(__name__)


def _min_positive_gap(values: np.ndarray) -> float:
    """서로 다른 값 사이 최소 간격 (값이 하나뿐이면 inf)"""
    distinct = np.unique(values)
    if distinct.size < 2:
        return math.inf
    return float(np.min(np.diff(distinct)))


class StabilityService:
    """ρ 근사값과 λ^{dr}({ρ ≤ t}) ≲ t^α 검증"""

    # 필트레이션별 이론 지수 α
    ALPHA_TARGETS = {
        FiltrationKind.VIETORIS_RIPS: 1.0,
        FiltrationKind.CECH: 0.5,
    }

    def alpha_target(self, kind: FiltrationKind) -> float:
        return self.ALPHA_TARGETS[FiltrationKind(kind)]

    # ------------------------------------------------------------------
    # ρ 근사
    # ------------------------------------------------------------------

    def _rho_lower_points(
        self, points: np.ndarray, kind: FiltrationKind, dim_cap: int, T: float, c_star: float
    ) -> float:
        r = points.shape[0]
        simplices = [J for size in range(2, dim_cap + 2) for J in combinations(range(r), size)]
        values = np.asarray(geometry_service.simplex_values(points, kind, simplices))
        gap = _min_positive_gap(values)
        return min(gap / (2.0 * c_star * math.sqrt(r)), T)

    def rho_lower(self, x: PointCloud, kind: FiltrationKind, dim_cap: int) -> RhoEstimate:
        """min_l (u_{l+1} − u_l) / (2 c* √r),  크기 1 심플렉스 제외"""
        if not 1 <= dim_cap <= x.r - 1:
            raise InputError(f"dim_cap은 [1, {x.r - 1}] 범위여야 합니다: {dim_cap}")
        T = geometry_service.filtration_cap(kind, x.domain)
        c_star = geometry_service.gradient_bound(kind)
        value = self._rho_lower_points(x.points, kind, dim_cap, T, c_star)
        return RhoEstimate(value=value, kind=RhoKind.LOWER_BOUND_GENERIC)

    def rho_vr_gap(self, x: PointCloud) -> RhoEstimate:
        """VR 전용: 정렬된 서로 다른 쌍 거리의 최소 간격 / 4"""
        T = geometry_service.filtration_cap(FiltrationKind.VIETORIS_RIPS, x.domain)
        dist = pairwise_distances(x.points)[np.triu_indices(x.r, 1)]
        value = min(_min_positive_gap(dist) / 4.0, T)
        return RhoEstimate(value=value, kind=RhoKind.EXACT_GAP_VR)

    def _vr_gap_batch(self, clouds: np.ndarray, T: float) -> np.ndarray:
        """(B, r, d) 배치의 VR 간격 근사 (벡터화)"""
        r = clouds.shape[1]
        iu, ju = np.triu_indices(r, 1)
        dist = np.sqrt(np.sum((clouds[:, iu, :] - clouds[:, ju, :]) ** 2, axis=2))
        gaps = np.diff(np.sort(dist, axis=1), axis=1)
        gaps[gaps == 0.0] = np.inf
        out = np.min(gaps, axis=1, initial=np.inf) / 4.0
        return np.minimum(out, T)

    def _chunk_proxies(
        self, kind: FiltrationKind, M: DomainM, r: int, dim_cap: int, size: int, seed: int, chunk: int
    ) -> np.ndarray:
        rng = stream(seed, "stability", chunk)
        clouds = rng.uniform(M.lo_array, M.hi_array, size=(size, r, M.d))
        T = geometry_service.filtration_cap(kind, M)
        if kind == FiltrationKind.VIETORIS_RIPS:
            return self._vr_gap_batch(clouds, T)
        c_star = geometry_service.gradient_bound(kind)
        return np.array([self._rho_lower_points(x, kind, dim_cap, T, c_star) for x in clouds])

    # ------------------------------------------------------------------
    # 몬테카를로 부분수준집합 측도
    # ------------------------------------------------------------------

    def default_t_grid(self, M: DomainM, per_decade: int = STABILITY_GRID_PER_DECADE,
                       grid_range: Tuple[float, float] = STABILITY_GRID_RANGE) -> List[float]:
        lo, hi = grid_range
        decades = math.log10(hi / lo)
        count = int(round(decades * per_decade)) + 1
        return list(np.logspace(math.log10(lo), math.log10(hi), count) * M.diameter)

    def default_window(self, M: DomainM,
                       window: Tuple[float, float] = STABILITY_FIT_WINDOW) -> Tuple[float, float]:
        return window[0] * M.diameter, window[1] * M.diameter

    def estimate_sublevel(
        self,
        kind: FiltrationKind,
        M: DomainM,
        r: int,
        dim_cap: int,
        t_grid: Sequence[float],
        n_samples: int,
        seed: int,
        threads: int = 1,
    ) -> SublevelCurve:
        """
        M^r 위 균등 표본으로 P(proxy ≤ t) 추정

        청크 크기가 고정이고 청크마다 독립 스트림을 쓰므로 결과는 병렬도와 무관하다.
        """
        kind = FiltrationKind(kind)
        t = np.asarray(list(t_grid), dtype=float)
        if t.size == 0:
            raise InputError("t_grid가 비어 있습니다.")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise InputError("t_grid는 양수이며 순증가해야 합니다.")
        if n_samples < STABILITY_MIN_SAMPLES:
            raise InputError(f"n_samples ≥ {STABILITY_MIN_SAMPLES} 이어야 합니다: {n_samples}")
        if not 1 <= dim_cap <= r - 1:
            raise InputError(f"dim_cap은 [1, {r - 1}] 범위여야 합니다: {dim_cap}")

        sizes = [STABILITY_CHUNK] * (n_samples // STABILITY_CHUNK)
        if n_samples % STABILITY_CHUNK:
            sizes.append(n_samples % STABILITY_CHUNK)

        chunks = Parallel(n_jobs=threads)(
            delayed(self._chunk_proxies)(kind, M, r, dim_cap, size, seed, i)
            for i, size in enumerate(sizes)
        )
        proxies = np.sort(np.concatenate(chunks))
        counts = np.searchsorted(proxies, t, side="right")
        p_hat = counts / n_samples
        stderr = np.sqrt(p_hat * (1.0 - p_hat) / n_samples)
        logger.info("부분수준 곡선 추정 완료: kind=%s, r=%d, n=%d", kind.value, r, n_samples)

        return SublevelCurve(
            t_grid=t.tolist(),
            p_hat=p_hat.tolist(),
            stderr=stderr.tolist(),
            n_samples=n_samples,
            kind=kind,
            r=r,
            d=M.d,
        )

    def fit_alpha(self, curve: SublevelCurve, t_lo: float, t_hi: float) -> AlphaFit:
        """구간 [t_lo, t_hi]에서 log p̂ ~ log t 최소제곱"""
        t = np.asarray(curve.t_grid)
        p = np.asarray(curve.p_hat)
        mask = (t >= t_lo) & (t <= t_hi) & (p > 0.0) & (p < 1.0)
        usable = int(np.count_nonzero(mask))
        if usable < 5:
            raise EstimationError(
                "α 추정에 사용할 격자점이 부족합니다 (최소 5개).",
                {"usable_points": usable, "t_lo": t_lo, "t_hi": t_hi,
                 "grid_points_in_window": int(np.count_nonzero((t >= t_lo) & (t <= t_hi)))},
            )
        fit = stats.linregress(np.log(t[mask]), np.log(p[mask]))
        return AlphaFit(
            alpha_hat=float(fit.slope),
            intercept=float(fit.intercept),
            stderr=float(fit.stderr),
            n_points=usable,
            t_lo=t_lo,
            t_hi=t_hi,
        )

    def upper_bound_check(
        self,
        curve: SublevelCurve,
        alpha: float,
        t_lo: float,
        t_hi: float,
        slack: float = UPPER_BOUND_SLACK,
    ) -> UpperBoundCheck:
        """
        구간 중앙(기하평균)에서 Ĉ 보정 후 p̂(t) ≤ slack·Ĉ·t^α 점검

        기준점 위쪽은 α보다 가파른 곡선이 정당하게 넘어설 수 있으므로 t ≤ 기준점만 본다.
        """
        t = np.asarray(curve.t_grid)
        p = np.asarray(curve.p_hat)
        in_window = (t >= t_lo) & (t <= t_hi)
        if not np.any(in_window):
            raise EstimationError("점검 구간에 격자점이 없습니다.", {"t_lo": t_lo, "t_hi": t_hi})
        midpoint = math.sqrt(t_lo * t_hi)
        candidates = np.flatnonzero(in_window)
        anchor = int(candidates[np.argmin(np.abs(np.log(t[candidates]) - math.log(midpoint)))])
        if p[anchor] <= 0.0:
            raise EstimationError("기준점의 p̂이 0이라 Ĉ를 보정할 수 없습니다.", {"t_anchor": float(t[anchor])})
        c_hat = float(p[anchor] / t[anchor] ** alpha)

        below = in_window & (t <= t[anchor])
        ratios = p[below] / (c_hat * t[below] ** alpha)
        worst = float(np.max(ratios))
        return UpperBoundCheck(
            alpha=alpha,
            c_hat=c_hat,
            t_anchor=float(t[anchor]),
            worst_ratio=worst,
            slack=slack,
            passed=worst <= slack,
        )


# 싱글톤 인스턴스
stability_service = StabilityService()
