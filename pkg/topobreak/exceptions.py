"""Exception hierarchy for topobreak"""
from typing import Any, Dict, Optional


class TopoBreakError(Exception):
    """패키지 공통 예외"""


class InputError(TopoBreakError, ValueError):
    """잘못된 입력값 (범위, 인덱스, 길이)"""


class ConfigError(TopoBreakError):
    """실험 설정 오류 (파싱, 스키마, 조합 불가)"""


class NumericError(TopoBreakError):
    """수치 계산 실패 (특이행렬 등)"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        detail = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({detail})"


class EstimationError(NumericError):
    """회귀/추정에 필요한 데이터 부족"""


class InvariantViolation(TopoBreakError):
    """내부 불변식 위반 (예: 다이어그램 길이 > N_k)"""
