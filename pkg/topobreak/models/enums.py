"""Enum definitions for topological break detection"""
from enum import Enum


class FiltrationKind(str, Enum):
    """필트레이션 함수 종류"""
    VIETORIS_RIPS = "VietorisRips"
    CECH = "Cech"


class RhoKind(str, Enum):
    """ρ 근사값 종류"""
    LOWER_BOUND_GENERIC = "LowerBoundGeneric"  # 간격 기반 하한 (모든 필트레이션)
    EXACT_GAP_VR = "ExactGapVR"                # VR 전용 거리 간격 / 4


class TieBreak(str, Enum):
    """동일 birth 정렬 정책"""
    DETERMINISTIC = "Deterministic"
    SEEDED_RANDOM = "SeededRandom"


class ReductionMethod(str, Enum):
    """경계행렬 축약 방식"""
    TWIST = "twist"    # clearing 최적화
    NAIVE = "naive"    # 검증용 표준 열 축약


class FeatureComponent(str, Enum):
    """특징 함수 f의 성분"""
    TOTAL_PERSISTENCE = "TotalPersistence"
    MAX_PERSISTENCE = "MaxPersistence"
    MEAN_BIRTH = "MeanBirth"
    MEAN_DEATH = "MeanDeath"


class InnovationDist(str, Enum):
    """혁신항 분포"""
    UNIFORM_BOX = "UniformBox"
    TRUNCATED_GAUSSIAN = "TruncatedGaussian"


class GeneratorKind(str, Enum):
    """점구름 시계열 생성기"""
    IID_CLOUDS = "IIDClouds"
    DELAY_EMBEDDING = "DelayEmbedding"


class BreakKind(str, Enum):
    """변화 후 변환"""
    MEAN_SHIFT = "MeanShift"
    SCALE_CHANGE = "ScaleChange"


class Statistic(str, Enum):
    """CUSUM 검정통계량"""
    LAMBDA = "Lambda"  # max_v S_v^T Γ^{-1} S_v
    OMEGA = "Omega"    # (1/n) Σ_v S_v^T Γ^{-1} S_v


class CvMethod(str, Enum):
    """임계값 산출 방식"""
    SIMULATED_QUANTILE = "SimulatedQuantile"
    NORMAL_APPROX = "NormalApprox"


class Kernel(str, Enum):
    """장기공분산 커널"""
    BARTLETT = "Bartlett"


class Weighting(str, Enum):
    """변화점 추정 가중행렬 Σ̃"""
    INVERSE_LRC = "InverseLrc"
    IDENTITY = "Identity"


class RunStatus(str, Enum):
    """실행 상태"""
    RUNNING = "running"
    OK = "ok"
    FAILED = "failed"
