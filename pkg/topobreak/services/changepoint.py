"""CUSUM change-point tests on feature series"""
import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from topobreak.config import (
    BRIDGE_GRID, BRIDGE_REPS, NORMAL_APPROX_MIN_ELL, RIDGE_CONDITION_THRESHOLD, RIDGE_FACTOR
)
from topobreak.exceptions import ConfigError, InputError, NumericError
from topobreak.models.enums import CvMethod, Kernel, Statistic, Weighting
from topobreak.models.schemas import (
    ChangePointEstimate, CusumSeries, LrcEstimate, StatSeries, TestResult
)
from topobreak.services.limit_law import limit_law_service

logger = logging.getLogger(__name__)

Bandwidth = Union[int, str]


class ChangepointService:
    """
    CUSUM 과정, 장기공분산, Λ/Ω 검정, 변화점 추정

    S_v = (Σ_{j≤v} Y_j − (v/n) Σ_j Y_j) / √n,  v = 1..n
    """

    def cusum(self, series: StatSeries) -> CusumSeries:
        Y = series.values
        n = series.n
        prefix = np.cumsum(Y, axis=0)
        total = prefix[-1]
        v = np.arange(1, n + 1, dtype=float)[:, None]
        S = (prefix - v * (total / n)) / math.sqrt(n)
        S[-1] = 0.0
        return CusumSeries(S=S)

    def resolve_bandwidth(self, n: int, bandwidth: Bandwidth = "auto") -> int:
        """auto → floor(n^{1/3})"""
        if bandwidth == "auto":
            b = int(math.floor(n ** (1.0 / 3.0)))
            # 부동소수 세제곱근 보정
            while (b + 1) ** 3 <= n:
                b += 1
            while b > 0 and b ** 3 > n:
                b -= 1
            return b
        b = int(bandwidth)
        if b < 0:
            raise InputError(f"bandwidth ≥ 0 이어야 합니다: {bandwidth}")
        return b

    def long_run_cov(self, series: StatSeries, bandwidth: Bandwidth = "auto",
                     kernel: Kernel = Kernel.BARTLETT) -> LrcEstimate:
        """Γ̂ = Σ_{|h|≤b} (1 − |h|/b) Ĉ(h),  b = 0 이면 Ĉ(0)"""
        if kernel not in (Kernel.BARTLETT, Kernel.BARTLETT.value):
            raise ConfigError(f"지원하지 않는 커널입니다: {kernel}")
        n, ell = series.n, series.ell
        b = self.resolve_bandwidth(n, bandwidth)
        if n <= 2 * b:
            raise InputError(f"표본 수 n={n}이 bandwidth={b}에 비해 너무 작습니다 (n > 2b 필요).")

        X = series.values - series.values.mean(axis=0)
        gamma = X.T @ X / n
        for h in range(1, b):
            weight = 1.0 - h / b
            C_h = X[h:].T @ X[:-h] / n
            gamma = gamma + weight * (C_h + C_h.T)
        gamma = 0.5 * (gamma + gamma.T)

        eigenvalues = np.linalg.eigvalsh(gamma)
        smallest, largest = float(eigenvalues.min()), float(np.abs(eigenvalues).max())
        condition = largest / smallest if smallest > 0.0 else math.inf

        ridge = 0.0
        if condition > RIDGE_CONDITION_THRESHOLD:
            trace = float(np.trace(gamma))
            # 영행렬이면 절대 ridge
            ridge = RIDGE_FACTOR * trace / ell if trace > 0.0 else RIDGE_FACTOR
            logger.debug("Γ̂ 조건수 %.3g > %.0e, ridge=%.3g 적용", condition, RIDGE_CONDITION_THRESHOLD, ridge)

        return LrcEstimate(
            gamma_hat=gamma,
            bandwidth=b,
            kernel=Kernel.BARTLETT,
            ridge=ridge,
            condition_number=condition,
        )

    def _quadratic_forms(self, S: CusumSeries, lrc: LrcEstimate) -> np.ndarray:
        """q_v = S_vᵀ (Γ̂ + ridge·I)⁻¹ S_v"""
        matrix = lrc.regularized
        try:
            factor = cho_factor(matrix, lower=True)
        except LinAlgError as e:
            eigenvalues = np.linalg.eigvalsh(matrix)
            raise NumericError(
                "장기공분산 행렬이 ridge 적용 후에도 양정치가 아닙니다.",
                {
                    "min_eigenvalue": float(eigenvalues.min()),
                    "max_eigenvalue": float(eigenvalues.max()),
                    "ridge": lrc.ridge,
                    "condition_number": lrc.condition_number,
                },
            ) from e
        solved = cho_solve(factor, S.S.T).T
        return np.einsum("vj,vj->v", S.S, solved)

    def lambda_stat(self, S: CusumSeries, lrc: LrcEstimate) -> float:
        """Λ = max_v q_v"""
        if not np.any(S.S):
            return 0.0
        return float(np.max(self._quadratic_forms(S, lrc)))

    def omega_stat(self, S: CusumSeries, lrc: LrcEstimate) -> float:
        """Ω = (1/n) Σ_v q_v"""
        if not np.any(S.S):
            return 0.0
        return float(np.sum(self._quadratic_forms(S, lrc)) / S.n)

    def statistic_value(self, statistic: Statistic, S: CusumSeries, lrc: LrcEstimate) -> float:
        if Statistic(statistic) == Statistic.LAMBDA:
            return self.lambda_stat(S, lrc)
        return self.omega_stat(S, lrc)

    def run_test(
        self,
        series: StatSeries,
        statistic: Statistic = Statistic.LAMBDA,
        level: float = 0.05,
        cv_method: CvMethod = CvMethod.SIMULATED_QUANTILE,
        bandwidth: Bandwidth = "auto",
        grid: int = BRIDGE_GRID,
        n_rep: int = BRIDGE_REPS,
        seed: int = 0,
        threads: int = 1,
    ) -> TestResult:
        """cusum → Γ̂ → 통계량 → 임계값 (시뮬레이션 표 또는 정규근사)"""
        statistic = Statistic(statistic)
        cv_method = CvMethod(cv_method)
        if not 0.0 < level < 1.0:
            raise InputError(f"유의수준은 (0,1) 범위여야 합니다: {level}")
        ell = series.ell
        if cv_method == CvMethod.NORMAL_APPROX and ell < NORMAL_APPROX_MIN_ELL:
            raise ConfigError(f"정규근사는 ℓ ≥ {NORMAL_APPROX_MIN_ELL}에서만 허용됩니다 (ℓ={ell}).")

        S = self.cusum(series)
        lrc = self.long_run_cov(series, bandwidth)
        value = self.statistic_value(statistic, S, lrc)

        if cv_method == CvMethod.SIMULATED_QUANTILE:
            table = limit_law_service.table(statistic, ell, grid, n_rep, seed, threads)
            critical = table.quantile(1.0 - level)
            p_value = table.p_value(value)
        else:
            critical = limit_law_service.normal_approx_cv(statistic, ell, 1.0 - level)
            p_value = limit_law_service.normal_p_value(statistic, ell, value)

        return TestResult(
            statistic=statistic,
            value=value,
            ell=ell,
            level=level,
            critical_value=critical,
            p_value=min(max(p_value, 0.0), 1.0),
            reject=value > critical,
            method=cv_method,
            bandwidth=lrc.bandwidth,
            ridge_applied=lrc.ridge_applied,
        )

    def estimate_changepoint(
        self,
        series: StatSeries,
        weighting: Weighting = Weighting.INVERSE_LRC,
        sigma_tilde: Optional[np.ndarray] = None,
        bandwidth: Bandwidth = "auto",
    ) -> ChangePointEstimate:
        """
        θ̂ = argmax_v S_vᵀ Σ̃ S_v / n

        argmax가 여러 개면 가장 작은 v. sigma_tilde를 주면 weighting보다 우선한다.
        """
        S = self.cusum(series)
        n, ell = series.n, series.ell

        if sigma_tilde is not None:
            weight = np.asarray(sigma_tilde, dtype=float)
            if weight.shape != (ell, ell):
                raise InputError(f"Σ̃ 크기는 ({ell}, {ell}) 이어야 합니다: {weight.shape}")
            if not np.array_equal(weight, weight.T) or np.linalg.eigvalsh(weight).min() <= 0.0:
                raise InputError("Σ̃는 대칭 양정치 행렬이어야 합니다.")
            objective = np.einsum("vi,ij,vj->v", S.S, weight, S.S)
        elif Weighting(weighting) == Weighting.IDENTITY:
            objective = np.einsum("vj,vj->v", S.S, S.S)
        else:
            objective = self._quadratic_forms(S, self.long_run_cov(series, bandwidth))

        v_hat = int(np.argmax(objective)) + 1
        return ChangePointEstimate(
            v_hat=v_hat,
            theta_hat=v_hat / n,
            objective=float(objective[v_hat - 1]),
            n=n,
        )

    def theoretical_drift(self, theta: float, delta_mean, t: float) -> np.ndarray:
        """S*(t) = t(1−θ)Δ (t ≤ θ),  (1−t)θΔ (t > θ)"""
        if not 0.0 < theta < 1.0:
            raise InputError(f"theta는 (0,1) 범위여야 합니다: {theta}")
        if not 0.0 <= t <= 1.0:
            raise InputError(f"t는 [0,1] 범위여야 합니다: {t}")
        delta = np.atleast_1d(np.asarray(delta_mean, dtype=float))
        if t <= theta:
            return t * (1.0 - theta) * delta
        return (1.0 - t) * theta * delta

    def drift_deviation(self, series: StatSeries, theta: float, delta_mean) -> float:
        """
        sup_t ‖n^{-1/2} S_{⌊nt⌋} − S*(t)‖ (격자 t = v/n, v = 0..n)

        delta_mean은 변화 전 평균 − 변화 후 평균 (E[f(Z)] − E[f(Z*)]).
        """
        S = self.cusum(series).S
        n = series.n
        delta = np.atleast_1d(np.asarray(delta_mean, dtype=float))
        if delta.shape != (series.ell,):
            raise InputError(f"delta_mean 길이는 ℓ={series.ell} 이어야 합니다.")
        path = np.vstack([np.zeros((1, series.ell)), S]) / math.sqrt(n)
        t = np.arange(n + 1) / n
        drift = np.where(
            (t <= theta)[:, None],
            (t * (1.0 - theta))[:, None] * delta,
            ((1.0 - t) * theta)[:, None] * delta,
        )
        return float(np.max(np.linalg.norm(path - drift, axis=1)))


# 싱글톤 인스턴스
changepoint_service = ChangepointService()
