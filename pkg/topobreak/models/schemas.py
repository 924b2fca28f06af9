"""Pydantic schemas for topological break detection"""
import math
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel, ConfigDict, Field, field_validator, model_validator
)
from scipy.spatial.distance import pdist

from topobreak.config import CONFIG_SCHEMA_VERSION
from .enums import (
    BreakKind, CvMethod, FeatureComponent, FiltrationKind, GeneratorKind,
    InnovationDist, Kernel, RhoKind, Statistic, TieBreak, Weighting
)


# 심플렉스 = [r]의 비어있지 않은 부분집합 (0-based, 오름차순)
SimplexIndex = Tuple[int, ...]


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


# ============ 기하 스키마 ============

class DomainM(BaseModel):
    """정의역 M = [lo, hi] ⊂ ℝ^d (컴팩트, 볼록, d차원)"""
    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1)
    lo: List[float]
    hi: List[float]

    @model_validator(mode="after")
    def _check_box(self) -> "DomainM":
        if len(self.lo) != self.d or len(self.hi) != self.d:
            raise ValueError(f"lo/hi 길이는 d={self.d}와 같아야 합니다.")
        for a, b in zip(self.lo, self.hi):
            if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
                raise ValueError(f"모든 축에서 lo < hi 이어야 합니다: lo={self.lo}, hi={self.hi}")
        return self

    @classmethod
    def unit(cls, d: int, side: float = 1.0) -> "DomainM":
        """[0, side]^d"""
        return cls(d=d, lo=[0.0] * d, hi=[float(side)] * d)

    @property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_array(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return (self.lo_array + self.hi_array) / 2.0

    @property
    def diameter(self) -> float:
        # 필트레이션 값과 같은 pdist 커널 (대각 꼭짓점 쌍에서 비트 단위로 일치)
        return float(pdist(np.vstack([self.lo_array, self.hi_array]))[0])

    def contains(self, points: np.ndarray) -> bool:
        points = np.asarray(points, dtype=float)
        return bool(np.all(points >= self.lo_array) and np.all(points <= self.hi_array))

    def clip(self, points: np.ndarray) -> np.ndarray:
        """박스로의 거리사영 (1-Lipschitz)"""
        return np.clip(points, self.lo_array, self.hi_array)


class PointCloud(BaseModel):
    """관측 단위 X_t = (X_{t,1}, ..., X_{t,r})"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    domain: DomainM

    @field_validator("points", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _readonly(value)

    @model_validator(mode="after")
    def _check_points(self) -> "PointCloud":
        if self.points.ndim != 2 or self.points.shape[1] != self.domain.d:
            raise ValueError(f"points 형태는 (r, {self.domain.d}) 이어야 합니다: {self.points.shape}")
        if self.points.shape[0] < 2:
            raise ValueError("점구름은 최소 2개의 점이 필요합니다.")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points에 유한하지 않은 값이 있습니다.")
        if not self.domain.contains(self.points):
            raise ValueError("모든 점은 정의역 M 안에 있어야 합니다.")
        return self

    @property
    def r(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    def permuted(self, perm: List[int]) -> "PointCloud":
        """점 라벨 재배열 (x_π)"""
        return PointCloud(points=self.points[list(perm)], domain=self.domain)


# ============ 지속성 스키마 ============

class FilteredComplex(BaseModel):
    """dim_cap 이하 모든 심플렉스와 필트레이션 값 (정렬됨)"""
    model_config = ConfigDict(frozen=True)

    kind: FiltrationKind
    r: int
    dim_cap: int
    simplices: List[SimplexIndex]
    dims: List[int]
    values: List[float]
    value_classes: List[float]  # u_1 < ... < u_L
    class_index: List[int]      # 심플렉스별 value_classes 인덱스

    def __len__(self) -> int:
        return len(self.simplices)

    @property
    def max_value(self) -> float:
        return self.value_classes[-1]


class PersistencePair(BaseModel):
    """(birth, death) 쌍"""
    model_config = ConfigDict(frozen=True)

    birth: float
    death: float
    dim: int
    essential: bool = False
    trivial: bool = False

    @model_validator(mode="after")
    def _check_order(self) -> "PersistencePair":
        if not 0.0 <= self.birth <= self.death:
            raise ValueError(f"0 ≤ birth ≤ death 위반: ({self.birth}, {self.death})")
        return self


class PersistenceDiagram(BaseModel):
    """차원 k 지속성 다이어그램 (열 배열로 보관)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    k: int = Field(ge=0)
    births: np.ndarray
    deaths: np.ndarray
    essential: np.ndarray
    trivial: np.ndarray

    @classmethod
    def from_pairs(cls, k: int, pairs: List[PersistencePair]) -> "PersistenceDiagram":
        return cls(
            k=k,
            births=np.array([p.birth for p in pairs], dtype=float),
            deaths=np.array([p.death for p in pairs], dtype=float),
            essential=np.array([p.essential for p in pairs], dtype=bool),
            trivial=np.array([p.trivial for p in pairs], dtype=bool),
        )

    def __len__(self) -> int:
        return int(self.births.shape[0])

    @property
    def n_nontrivial(self) -> int:
        return int(np.count_nonzero(~self.trivial))


class FeatureVector(BaseModel):
    """Z_{k,t} = (d_1, b_1, ..., d_{N_k}, b_{N_k})"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    k: int
    z: np.ndarray

    @field_validator("z", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _readonly(value)

    @property
    def deaths(self) -> np.ndarray:
        return self.z[0::2]

    @property
    def births(self) -> np.ndarray:
        return self.z[1::2]

    @property
    def persistences(self) -> np.ndarray:
        return self.deaths - self.births


class FeatureMapItem(BaseModel):
    """특징 함수 f의 한 성분"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    component: FeatureComponent
    gamma: Optional[Union[float, Literal["inf"]]] = None

    @model_validator(mode="after")
    def _check_gamma(self) -> "FeatureMapItem":
        if self.component == FeatureComponent.TOTAL_PERSISTENCE:
            if self.gamma is None:
                raise ValueError("TotalPersistence에는 gamma가 필요합니다.")
            if self.gamma != "inf" and self.gamma < 1.0:
                raise ValueError(f"gamma ≥ 1 이어야 합니다: {self.gamma}")
        return self

    @property
    def gamma_value(self) -> float:
        if self.gamma is None or self.gamma == "inf":
            return math.inf
        return float(self.gamma)


# ============ 안정성 스키마 ============

class RhoEstimate(BaseModel):
    """ρ(x)의 계산 가능한 근사값"""
    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0)
    kind: RhoKind


class SublevelCurve(BaseModel):
    """λ^{dr}({ρ ≤ t})의 몬테카를로 추정 곡선"""
    model_config = ConfigDict(frozen=True)

    t_grid: List[float]
    p_hat: List[float]
    stderr: List[float]
    n_samples: int
    kind: FiltrationKind
    r: int
    d: int

    @model_validator(mode="after")
    def _check_curve(self) -> "SublevelCurve":
        if not (len(self.t_grid) == len(self.p_hat) == len(self.stderr)):
            raise ValueError("t_grid, p_hat, stderr 길이가 다릅니다.")
        if any(not 0.0 <= p <= 1.0 for p in self.p_hat):
            raise ValueError("p_hat은 [0,1] 범위여야 합니다.")
        if any(b < a for a, b in zip(self.p_hat, self.p_hat[1:])):
            raise ValueError("p_hat은 t에 대해 단조 비감소여야 합니다.")
        return self


class AlphaFit(BaseModel):
    """log p̂ ~ log t 회귀 결과"""
    alpha_hat: float
    intercept: float
    stderr: float
    n_points: int
    t_lo: float
    t_hi: float


class UpperBoundCheck(BaseModel):
    """p̂(t) ≤ slack · Ĉ · t^α 점검 결과"""
    alpha: float
    c_hat: float
    t_anchor: float
    worst_ratio: float
    slack: float
    passed: bool


# ============ 시계열 생성 스키마 ============

class InnovationSpec(BaseModel):
    """i.i.d. 혁신항 ε_t 분포"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dist: InnovationDist = InnovationDist.UNIFORM_BOX
    dim: int = Field(ge=1)
    lo: List[float]
    hi: List[float]
    mean: Optional[List[float]] = None
    sd: Optional[float] = None

    @model_validator(mode="after")
    def _check_dist(self) -> "InnovationSpec":
        if len(self.lo) != self.dim or len(self.hi) != self.dim:
            raise ValueError("혁신항 박스 차원이 dim과 다릅니다.")
        if any(not (math.isfinite(a) and math.isfinite(b) and a < b) for a, b in zip(self.lo, self.hi)):
            raise ValueError("혁신항 박스 경계는 유한하고 lo < hi 이어야 합니다.")
        if self.dist == InnovationDist.TRUNCATED_GAUSSIAN:
            if self.sd is None or self.sd <= 0:
                raise ValueError("TruncatedGaussian에는 sd > 0 이 필요합니다.")
            if self.mean is None or len(self.mean) != self.dim:
                raise ValueError("TruncatedGaussian의 mean 길이가 dim과 다릅니다.")
        return self

    @classmethod
    def uniform(cls, lo: List[float], hi: List[float]) -> "InnovationSpec":
        return cls(dist=InnovationDist.UNIFORM_BOX, dim=len(lo), lo=list(lo), hi=list(hi))


class LinearProcessSpec(BaseModel):
    """Y_t = offset + Σ_{k=0}^{K} a_k ε_{t-k},  a_k = scale·(k+1)^{-β}·I"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    decay_exponent: float = Field(gt=1.0)
    scale: float = Field(ge=0.0)
    truncation_lag: int = Field(ge=1)
    offset: Optional[List[float]] = None  # None이면 M의 중심

    def coefficients(self) -> np.ndarray:
        lags = np.arange(self.truncation_lag + 1, dtype=float)
        return self.scale * (lags + 1.0) ** (-self.decay_exponent)


class CloudSeriesSpec(BaseModel):
    """점구름 시계열 생성 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    generator: GeneratorKind = GeneratorKind.IID_CLOUDS
    n: int = Field(ge=2)
    domain: DomainM
    r: int = Field(ge=2)
    innovation: Optional[InnovationSpec] = None
    linear_process: Optional[LinearProcessSpec] = None

    @model_validator(mode="after")
    def _check_generator(self) -> "CloudSeriesSpec":
        if self.generator == GeneratorKind.DELAY_EMBEDDING and self.linear_process is None:
            raise ValueError("DelayEmbedding 생성기에는 linear_process가 필요합니다.")
        if self.innovation is not None and self.innovation.dim != self.domain.d:
            raise ValueError("혁신항 차원이 정의역 차원과 다릅니다.")
        lp = self.linear_process
        if lp is not None and lp.offset is not None and len(lp.offset) != self.domain.d:
            raise ValueError("linear_process.offset 길이가 정의역 차원과 다릅니다.")
        return self

    @property
    def burn_in(self) -> int:
        """지연임베딩이 읽는 과거 혁신항 개수 (K + r - 1)"""
        if self.linear_process is None:
            return 0
        return self.linear_process.truncation_lag + self.r - 1


class BreakSpec(BaseModel):
    """H_1 구조변화 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    theta: float = Field(gt=0.0, lt=1.0)
    kind: BreakKind = BreakKind.MEAN_SHIFT
    delta: Optional[List[float]] = None  # MeanShift 이동 벡터
    factor: Optional[float] = None       # ScaleChange 배율 (M 중심 기준)

    @model_validator(mode="after")
    def _check_kind(self) -> "BreakSpec":
        if self.kind == BreakKind.MEAN_SHIFT and self.delta is None:
            raise ValueError("MeanShift에는 delta가 필요합니다.")
        if self.kind == BreakKind.SCALE_CHANGE and (self.factor is None or self.factor <= 0):
            raise ValueError("ScaleChange에는 factor > 0 이 필요합니다.")
        return self

    def change_index(self, n: int) -> int:
        """v* = floor(n θ)"""
        return int(math.floor(n * self.theta))


class ApproxProfile(BaseModel):
    """m별 결합 불일치 ν̂_m 과 가중 부분합"""
    m: List[int]
    nu_hat: List[float]
    stderr: List[float]
    weighted_partial_sums: List[float]
    p: float
    alpha: float
    delta: float

    @property
    def last_decade_increment(self) -> float:
        """마지막 10배 구간 [M/10, M]에서 가중 부분합의 상대 증가율"""
        m_max = self.m[-1]
        sums = dict(zip(self.m, self.weighted_partial_sums))
        start = [m for m in self.m if m <= max(m_max // 10, self.m[0])][-1]
        base = sums[start]
        if base == 0.0:
            return 0.0 if sums[m_max] == 0.0 else math.inf
        return (sums[m_max] - base) / base


# ============ 변화점 스키마 ============

class StatSeries(BaseModel):
    """f(Z_{k,t}) 시계열 (n × ℓ)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=float, copy=True)
        if array.ndim == 1:
            array = array[:, None]
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_values(self) -> "StatSeries":
        if self.values.ndim != 2 or self.values.shape[0] < 2 or self.values.shape[1] < 1:
            raise ValueError(f"StatSeries는 n ≥ 2, ℓ ≥ 1 이어야 합니다: {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("StatSeries에 유한하지 않은 값이 있습니다.")
        return self

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def ell(self) -> int:
        return int(self.values.shape[1])


class CusumSeries(BaseModel):
    """S_v, v = 1..n"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    S: np.ndarray

    @property
    def n(self) -> int:
        return int(self.S.shape[0])


class LrcEstimate(BaseModel):
    """장기공분산 추정 Γ̂"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    gamma_hat: np.ndarray
    bandwidth: int
    kernel: Kernel = Kernel.BARTLETT
    ridge: float = Field(ge=0.0)
    condition_number: float

    @property
    def ridge_applied(self) -> bool:
        return self.ridge > 0.0

    @property
    def regularized(self) -> np.ndarray:
        return self.gamma_hat + self.ridge * np.eye(self.gamma_hat.shape[0])


class QuantileTable(BaseModel):
    """Λ(ℓ)/Ω(ℓ) 시뮬레이션 분위수 표"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    statistic: Statistic
    ell: int
    grid: int
    n_rep: int
    seed: int
    quantiles: Dict[float, float]
    mean: float
    variance: float
    samples: np.ndarray = Field(exclude=True)  # 오름차순 정렬

    def quantile(self, level: float) -> float:
        if level in self.quantiles:
            return self.quantiles[level]
        return float(np.quantile(self.samples, level))

    def p_value(self, value: float) -> float:
        """P(한계분포 ≥ value)의 경험적 추정"""
        exceed = self.samples.shape[0] - np.searchsorted(self.samples, value, side="left")
        return float(exceed / self.samples.shape[0])


class TestResult(BaseModel):
    """검정 결과"""
    __test__ = False  # pytest 수집 대상 아님

    statistic: Statistic
    value: float
    ell: int
    level: float
    critical_value: float
    p_value: float = Field(ge=0.0, le=1.0)
    reject: bool
    method: CvMethod
    bandwidth: int
    ridge_applied: bool

    @model_validator(mode="after")
    def _check_decision(self) -> "TestResult":
        if self.reject != (self.value > self.critical_value):
            raise ValueError("reject ⟺ value > critical_value 위반")
        return self


class ChangePointEstimate(BaseModel):
    """θ̂ = v̂ / n"""
    v_hat: int
    theta_hat: float = Field(gt=0.0, le=1.0)
    objective: float
    n: int


# ============ 실험 설정 스키마 ============

class FiltrationConfig(BaseModel):
    """필트레이션 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: FiltrationKind = FiltrationKind.VIETORIS_RIPS
    dim_cap: int = Field(default=2, ge=1)


class TestConfig(BaseModel):
    """검정 설정"""
    __test__ = False
    model_config = ConfigDict(frozen=True, extra="forbid")

    statistics: List[Statistic] = Field(default_factory=lambda: [Statistic.LAMBDA, Statistic.OMEGA], min_length=1)
    level: float = Field(default=0.05, gt=0.0, lt=1.0)
    cv_method: CvMethod = CvMethod.SIMULATED_QUANTILE
    bandwidth: Union[int, Literal["auto"]] = "auto"
    estimate_changepoint: bool = False
    weighting: Weighting = Weighting.INVERSE_LRC
    tie_break: TieBreak = TieBreak.DETERMINISTIC
    grid: int = Field(default=2 ** 12, ge=1000)
    n_rep: int = Field(default=20000, ge=1000)


class StabilityConfig(BaseModel):
    """안정성 지수 추정 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_samples: int = Field(default=100000, ge=0)
    grid_per_decade: int = Field(default=24, ge=1)
    grid_range: Tuple[float, float] = (1e-4, 1e-1)   # diam(M) 배수
    fit_window: Tuple[float, float] = (1e-4, 1e-2)   # diam(M) 배수
    slack: float = Field(default=1.25, ge=1.0)


class ApproxConfig(BaseModel):
    """m-근사 프로파일 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    p: float = 2.0
    alpha: float = Field(default=1.0, gt=0.0)
    m_list: List[int] = Field(default_factory=lambda: list(range(1, 101)), min_length=1)
    n_mc: int = Field(default=20000, ge=2)
    delta: float = Field(default=0.1, gt=0.0)
    feature_level: bool = False


class CritvalConfig(BaseModel):
    """임계값 표 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    statistic: Statistic = Statistic.LAMBDA
    ell: int = Field(default=1, ge=1)
    grid: int = Field(default=2 ** 12, ge=1000)
    n_rep: int = Field(default=20000, ge=1000)


class ExperimentConfig(BaseModel):
    """실험 한 건의 선언적 설정"""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    schema_version: Literal[CONFIG_SCHEMA_VERSION] = CONFIG_SCHEMA_VERSION
    run_id: str = Field(min_length=1)
    seed: int = Field(ge=0, lt=2 ** 64)
    replications: int = Field(default=1, ge=1)
    threads: int = Field(default=1, ge=1)
    generator: CloudSeriesSpec
    break_spec: Optional[BreakSpec] = Field(default=None, alias="break")
    filtration: FiltrationConfig = Field(default_factory=FiltrationConfig)
    feature_dim: int = Field(default=0, ge=0)
    feature_map: List[FeatureMapItem] = Field(min_length=1)
    test: TestConfig = Field(default_factory=TestConfig)
    stability: StabilityConfig = Field(default_factory=StabilityConfig)
    approx: ApproxConfig = Field(default_factory=ApproxConfig)
    critvals: CritvalConfig = Field(default_factory=CritvalConfig)
    outputs: str = "output"

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ExperimentConfig":
        r = self.generator.r
        k = self.feature_dim
        if k + 2 > r:
            raise ValueError(f"k + 2 ≤ r 이어야 합니다: k={k}, r={r}")
        cap = self.filtration.dim_cap
        if not k + 1 <= cap <= r - 1:
            raise ValueError(f"k + 1 ≤ dim_cap ≤ r - 1 이어야 합니다: dim_cap={cap}")
        if self.break_spec is not None:
            v_star = self.break_spec.change_index(self.generator.n)
            if not 1 <= v_star < self.generator.n:
                raise ValueError(f"변화점 v*={v_star}가 [1, n) 범위를 벗어납니다.")
        return self


class RunManifest(BaseModel):
    """실행 재현 정보"""
    command: str
    config: Dict[str, Any]
    derived: Dict[str, Any]
    started_at: str
    finished_at: str
    wall_clock_seconds: float
    artifacts: List[str]
    library_version: str
