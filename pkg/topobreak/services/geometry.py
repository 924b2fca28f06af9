"""Filtration functions on point clouds (Vietoris-Rips, Čech)"""
import logging
import math
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from topobreak.config import BALL_CONTAINMENT_RTOL, PINV_RTOL
from topobreak.exceptions import InputError, NumericError
from topobreak.models.enums import FiltrationKind
from topobreak.models.schemas import DomainM, PointCloud, SimplexIndex

logger = logging.getLogger(__name__)

# (center, radius, support)
Ball = Tuple[Optional[np.ndarray], float, Tuple[int, ...]]


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """유클리드 거리 행렬 (대칭, 비트 단위 동일)"""
    return squareform(pdist(points, metric="euclidean"))


def _lex_order(points: np.ndarray, indices: Sequence[int]) -> List[int]:
    """좌표 사전식 정렬 (라벨과 무관한 표준 순서)"""
    indices = list(indices)
    subset = points[indices]
    order = np.lexsort(subset.T[::-1])
    return [indices[i] for i in order]


class EnclosingBallSolver:
    """
    최소포함구 (Welzl 재귀)

    - 점 처리 순서와 지지집합 모두 좌표 사전식으로 정렬해 라벨 치환에 대해 비트 단위로 동일
    - 반지름은 지지집합만으로 다시 계산하므로 구조적 동률(둔각삼각형과 최장변 등)이 정확히 같은 값
    - 아핀 종속 지지집합은 의사역행렬 최소노름 해로 처리
    """

    def __init__(self, rtol: float = BALL_CONTAINMENT_RTOL, pinv_rtol: float = PINV_RTOL):
        self.rtol = rtol
        self.pinv_rtol = pinv_rtol

    def radius(self, points: np.ndarray, members: Sequence[int], dist: np.ndarray) -> float:
        if len(members) <= 1:
            return 0.0
        if len(members) == 2:
            a, b = members
            return float(dist[a, b] / 2.0)
        order = _lex_order(points, members)
        _, _, support = self._welzl(points, dist, order, [], points.shape[1])
        if not support:
            raise NumericError("최소포함구 계산 실패", {"members": tuple(members)})
        return self.support_radius(points, support, dist)

    def support_radius(self, points: np.ndarray, support: Sequence[int], dist: np.ndarray) -> float:
        """지지집합의 외접구 반지름 (표준 순서로 계산)"""
        _, radius, _ = self._ball_from_support(points, _lex_order(points, support), dist)
        return radius

    def _welzl(self, points, dist, P: List[int], R: List[int], d: int) -> Ball:
        if not P or len(R) == d + 1:
            return self._ball_from_support(points, R, dist)
        p = P[-1]
        ball = self._welzl(points, dist, P[:-1], R, d)
        if self._contains(ball, points[p]):
            return ball
        return self._welzl(points, dist, P[:-1], R + [p], d)

    def _contains(self, ball: Ball, point: np.ndarray) -> bool:
        center, radius, _ = ball
        if center is None:
            return False
        return float(np.linalg.norm(point - center)) <= radius * (1.0 + self.rtol)

    def _ball_from_support(self, points: np.ndarray, R: List[int], dist: np.ndarray) -> Ball:
        if not R:
            return None, -math.inf, ()
        if len(R) == 1:
            return points[R[0]].copy(), 0.0, (R[0],)
        if len(R) == 2:
            a, b = R
            return (points[a] + points[b]) / 2.0, float(dist[a, b] / 2.0), (a, b)

        # 외심: c = p0 + A^T λ,  (A A^T) λ = ½ |p_i - p0|²
        base = points[R[0]]
        A = points[R[1:]] - base
        G = A @ A.T
        rhs = 0.5 * np.diag(G)
        lam = np.linalg.pinv(G, rcond=self.pinv_rtol) @ rhs
        center = base + A.T @ lam
        radius = float(np.max(np.linalg.norm(points[R] - center, axis=1)))
        if not math.isfinite(radius):
            raise NumericError("외심 계산이 수렴하지 않았습니다.", {"support": tuple(R)})
        return center, radius, tuple(R)


class GeometryService:
    """정의역, 점구름, 필트레이션 함수 φ[J](x)"""

    # 필트레이션별 기울기 상한 c*
    GRADIENT_BOUNDS = {
        FiltrationKind.VIETORIS_RIPS: math.sqrt(2.0),
        FiltrationKind.CECH: 1.0,
    }

    def __init__(self):
        self.ball_solver = EnclosingBallSolver()

    def _check_simplex(self, J: SimplexIndex, r: int) -> Tuple[int, ...]:
        members = tuple(int(j) for j in J)
        if not members:
            raise InputError("심플렉스는 비어 있을 수 없습니다.")
        if any(b <= a for a, b in zip(members, members[1:])):
            raise InputError(f"심플렉스 인덱스는 오름차순이어야 합니다: {members}")
        if members[0] < 0 or members[-1] >= r:
            raise InputError(f"심플렉스 인덱스가 범위 [0, {r}) 를 벗어납니다: {members}")
        return members

    def vr_value(self, J: SimplexIndex, x: PointCloud) -> float:
        """φ[J](x) = max_{i,j∈J} ‖x_i − x_j‖"""
        members = self._check_simplex(J, x.r)
        if len(members) == 1:
            return 0.0
        dist = pairwise_distances(x.points)
        return float(dist[np.ix_(members, members)].max())

    def cech_value(self, J: SimplexIndex, x: PointCloud) -> float:
        """x(J)의 최소포함구 반지름"""
        members = self._check_simplex(J, x.r)
        dist = pairwise_distances(x.points)
        return self.ball_solver.radius(x.points, members, dist)

    def filtration_cap(self, kind: FiltrationKind, M: DomainM) -> float:
        """모든 필트레이션 값의 상한 T"""
        diam = M.diameter
        if kind == FiltrationKind.VIETORIS_RIPS:
            return diam
        # Jung 상한
        return diam * math.sqrt(M.d / (2.0 * (M.d + 1)))

    def gradient_bound(self, kind: FiltrationKind) -> float:
        """c* = ess sup ‖∇φ[J]‖"""
        return self.GRADIENT_BOUNDS[FiltrationKind(kind)]

    def simplex_values(
        self,
        points: np.ndarray,
        kind: FiltrationKind,
        simplices: Sequence[Tuple[int, ...]],
        dist: Optional[np.ndarray] = None,
    ) -> List[float]:
        """
        심플렉스 목록의 필트레이션 값 (검증 생략, 내부용)

        크기 순으로 계산하며 면(facet) 값의 최댓값으로 단조성을 보정한다.
        """
        if dist is None:
            dist = pairwise_distances(points)
        values: Dict[Tuple[int, ...], float] = {}
        for J in sorted(simplices, key=len):
            if len(J) == 1:
                value = 0.0
            elif kind == FiltrationKind.VIETORIS_RIPS:
                value = float(dist[np.ix_(J, J)].max()) if len(J) > 2 else float(dist[J[0], J[1]])
            else:
                value = self.ball_solver.radius(points, J, dist)
                if len(J) > 2:
                    facet_max = max(values.get(F, 0.0) for F in combinations(J, len(J) - 1))
                    value = max(value, facet_max)
            values[tuple(J)] = value
        return [values[tuple(J)] for J in simplices]


# 싱글톤 인스턴스
geometry_service = GeometryService()
