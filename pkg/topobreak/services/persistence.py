"""Persistent homology of small point clouds and fixed-length feature vectors"""
import logging
import math
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from topobreak.config import CAP_RTOL
from topobreak.exceptions import ConfigError, InputError, InvariantViolation
from topobreak.models.enums import FeatureComponent, FiltrationKind, ReductionMethod, TieBreak
from topobreak.models.schemas import (
    FeatureMapItem, FeatureVector, FilteredComplex, PersistenceDiagram, PointCloud
)
from topobreak.services.geometry import geometry_service

logger = logging.getLogger(__name__)


def n_features(r: int, k: int) -> int:
    """N_k = C(r, k+1) + C(r, k+2)"""
    return math.comb(r, k + 1) + math.comb(r, k + 2)


class PersistenceService:
    """필트레이션 구성, 경계행렬 축약(Z/2), 특징 벡터 Z_{k,t}"""

    def build_filtration(self, x: PointCloud, kind: FiltrationKind, dim_cap: int) -> FilteredComplex:
        """dim_cap 차원 이하 모든 심플렉스를 (값, 차원, 사전식) 순으로 정렬"""
        r = x.r
        if not 1 <= dim_cap <= r - 1:
            raise InputError(f"dim_cap은 [1, {r - 1}] 범위여야 합니다: {dim_cap}")

        simplices = [
            J for size in range(1, dim_cap + 2)
            for J in combinations(range(r), size)
        ]
        values = geometry_service.simplex_values(x.points, kind, simplices)

        order = sorted(range(len(simplices)), key=lambda i: (values[i], len(simplices[i]), simplices[i]))
        sorted_simplices = [simplices[i] for i in order]
        sorted_values = [values[i] for i in order]

        value_classes = sorted(set(sorted_values))
        class_of = {u: l for l, u in enumerate(value_classes)}

        return FilteredComplex(
            kind=kind,
            r=r,
            dim_cap=dim_cap,
            simplices=sorted_simplices,
            dims=[len(J) - 1 for J in sorted_simplices],
            values=sorted_values,
            value_classes=value_classes,
            class_index=[class_of[v] for v in sorted_values],
        )

    # ------------------------------------------------------------------
    # 경계행렬 축약
    # ------------------------------------------------------------------

    def _boundary(self, c: FilteredComplex, index: Dict[Tuple[int, ...], int], j: int) -> Set[int]:
        J = c.simplices[j]
        if len(J) == 1:
            return set()
        return {index[F] for F in combinations(J, len(J) - 1)}

    def _reduce_twist(self, c: FilteredComplex, k: int) -> Tuple[List[Tuple[int, int]], List[int]]:
        """
        clearing 최적화 열 축약

        k+1 차원 열을 먼저 축약하고, 그 pivot 행에 해당하는 k 차원 열은 0으로 둔다.
        반환: (k 차원 (birth 인덱스, death 인덱스) 쌍, k 차원 양(positive) 심플렉스)
        """
        index = {J: i for i, J in enumerate(c.simplices)}
        pivot_column: Dict[int, int] = {}
        reduced: Dict[int, Set[int]] = {}
        cleared: Set[int] = set()
        pairs: List[Tuple[int, int]] = []
        positive: List[int] = []

        for q in (k + 1, k):
            for j, dim in enumerate(c.dims):
                if dim != q:
                    continue
                if j in cleared:
                    positive.append(j)
                    continue
                col = self._boundary(c, index, j)
                while col:
                    low = max(col)
                    owner = pivot_column.get(low)
                    if owner is None:
                        break
                    col ^= reduced[owner]
                if col:
                    low = max(col)
                    pivot_column[low] = j
                    reduced[j] = col
                    if q == k + 1:
                        cleared.add(low)
                        pairs.append((low, j))
                elif q == k:
                    positive.append(j)
        return pairs, positive

    def _reduce_naive(self, c: FilteredComplex, k: int) -> Tuple[List[Tuple[int, int]], List[int]]:
        """검증용 표준 축약 (밀집 행렬, 모든 차원, 최적화 없음)"""
        size = len(c.simplices)
        index = {J: i for i, J in enumerate(c.simplices)}
        R = np.zeros((size, size), dtype=np.uint8)
        for j in range(size):
            for i in self._boundary(c, index, j):
                R[i, j] = 1

        def low(col: int) -> int:
            nz = np.flatnonzero(R[:, col])
            return int(nz[-1]) if nz.size else -1

        lows = [-1] * size
        for j in range(size):
            l = low(j)
            while l >= 0:
                other = next((p for p in range(j) if lows[p] == l), None)
                if other is None:
                    break
                R[:, j] ^= R[:, other]
                l = low(j)
            lows[j] = l

        pairs = [(lows[j], j) for j in range(size) if lows[j] >= 0 and c.dims[lows[j]] == k]
        positive = [j for j in range(size) if c.dims[j] == k and lows[j] < 0]
        return pairs, positive

    def compute_persistence(
        self,
        c: FilteredComplex,
        k: int,
        T: float,
        method: ReductionMethod = ReductionMethod.TWIST,
    ) -> PersistenceDiagram:
        """차원 k (birth, death) 쌍과 death = T 인 본질적(essential) 클래스 (패딩 전)"""
        if k < 0 or k + 1 > c.dim_cap:
            raise InputError(f"복합체가 k+1={k + 1} 차원을 포함하지 않습니다 (dim_cap={c.dim_cap}).")
        if c.max_value > T * (1.0 + CAP_RTOL):
            raise InputError(f"T={T}가 최대 필트레이션 값 {c.max_value}보다 작습니다.")

        if ReductionMethod(method) == ReductionMethod.NAIVE:
            pairs, positive = self._reduce_naive(c, k)
        else:
            pairs, positive = self._reduce_twist(c, k)

        killed = {i for i, _ in pairs}
        births: List[float] = []
        deaths: List[float] = []
        essential: List[bool] = []
        for i, j in pairs:
            # 허용오차 안의 초과분은 T로 절단
            b, d = min(c.values[i], T), min(c.values[j], T)
            if d > b:
                births.append(b)
                deaths.append(d)
                essential.append(False)
        for i in positive:
            if i not in killed:
                births.append(min(c.values[i], T))
                deaths.append(T)
                essential.append(True)

        order = np.lexsort((np.asarray(deaths), np.asarray(births))) if births else np.array([], dtype=int)
        return PersistenceDiagram(
            k=k,
            births=np.asarray(births, dtype=float)[order],
            deaths=np.asarray(deaths, dtype=float)[order],
            essential=np.asarray(essential, dtype=bool)[order],
            trivial=np.zeros(len(births), dtype=bool),
        )

    def pad_diagram(self, pd_: PersistenceDiagram, N_k: int) -> PersistenceDiagram:
        """대각선의 자명한 (0, 0) 쌍으로 정확히 N_k 개까지 채움"""
        size = len(pd_)
        if size > N_k:
            raise InvariantViolation(f"다이어그램 쌍 개수 {size}가 N_k={N_k}를 초과합니다.")
        pad = N_k - size
        if pad == 0:
            return pd_
        return PersistenceDiagram(
            k=pd_.k,
            births=np.concatenate([pd_.births, np.zeros(pad)]),
            deaths=np.concatenate([pd_.deaths, np.zeros(pad)]),
            essential=np.concatenate([pd_.essential, np.zeros(pad, dtype=bool)]),
            trivial=np.concatenate([pd_.trivial, np.ones(pad, dtype=bool)]),
        )

    def feature_vector(
        self,
        pd_: PersistenceDiagram,
        tie_break: TieBreak = TieBreak.DETERMINISTIC,
        rng: Optional[np.random.Generator] = None,
    ) -> FeatureVector:
        """birth 오름차순 정렬 후 (d, b) 교차 배치"""
        if TieBreak(tie_break) == TieBreak.SEEDED_RANDOM:
            if rng is None:
                raise InputError("SeededRandom 정렬에는 난수 스트림이 필요합니다.")
            order = np.lexsort((rng.random(len(pd_)), pd_.births))
        else:
            # 동일 (birth, death) 안에서는 패딩이 먼저
            order = np.lexsort((~pd_.trivial, pd_.deaths, pd_.births))
        z = np.empty(2 * len(pd_), dtype=float)
        z[0::2] = pd_.deaths[order]
        z[1::2] = pd_.births[order]
        return FeatureVector(k=pd_.k, z=z)

    def total_persistence(self, z: FeatureVector, gamma: float) -> float:
        """‖(d_i − b_i)_i‖_γ,  γ ∈ [1, ∞]"""
        if not gamma >= 1.0:
            raise InputError(f"gamma ≥ 1 이어야 합니다: {gamma}")
        pers = z.persistences
        if pers.size == 0:
            return 0.0
        return float(np.linalg.norm(pers, ord=gamma))

    def _coerce_items(self, spec: Iterable[Union[FeatureMapItem, dict]]) -> List[FeatureMapItem]:
        items = []
        for raw in spec:
            if isinstance(raw, FeatureMapItem):
                items.append(raw)
                continue
            try:
                items.append(FeatureMapItem.model_validate(raw))
            except ValidationError as e:
                raise ConfigError(f"알 수 없는 특징 성분입니다: {raw} ({e.error_count()}개 오류)") from e
        if not items:
            raise ConfigError("특징 함수는 최소 1개 성분이 필요합니다 (ℓ ≥ 1).")
        return items

    def feature_map(self, z: FeatureVector, spec: Sequence[Union[FeatureMapItem, dict]]) -> np.ndarray:
        """f: ℝ^{2N_k} → ℝ^ℓ"""
        items = self._coerce_items(spec)
        out = np.empty(len(items), dtype=float)
        for i, item in enumerate(items):
            if item.component == FeatureComponent.TOTAL_PERSISTENCE:
                out[i] = self.total_persistence(z, item.gamma_value)
            elif item.component == FeatureComponent.MAX_PERSISTENCE:
                out[i] = self.total_persistence(z, math.inf)
            elif item.component == FeatureComponent.MEAN_BIRTH:
                out[i] = float(z.births.mean())
            elif item.component == FeatureComponent.MEAN_DEATH:
                out[i] = float(z.deaths.mean())
            else:
                raise ConfigError(f"지원하지 않는 특징 성분입니다: {item.component}")
        return out

    def lipschitz_constant(self, item: FeatureMapItem, N_k: int) -> float:
        """성분별 Lipschitz 상수 (z의 유클리드 노름 기준)"""
        if item.component == FeatureComponent.TOTAL_PERSISTENCE:
            inv_conjugate = 1.0 - 1.0 / item.gamma_value  # 1/γ' = 1 − 1/γ
            return math.sqrt(2.0) * N_k ** inv_conjugate
        if item.component == FeatureComponent.MAX_PERSISTENCE:
            return math.sqrt(2.0)
        return N_k ** -0.5

    def cloud_features(
        self,
        x: PointCloud,
        kind: FiltrationKind,
        k: int,
        dim_cap: int,
        tie_break: TieBreak = TieBreak.DETERMINISTIC,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[PersistenceDiagram, FeatureVector]:
        """점구름 → 패딩된 다이어그램 → Z_{k,t}"""
        T = geometry_service.filtration_cap(kind, x.domain)
        complex_ = self.build_filtration(x, kind, dim_cap)
        diagram = self.pad_diagram(self.compute_persistence(complex_, k, T), n_features(x.r, k))
        return diagram, self.feature_vector(diagram, tie_break, rng)

    def export_diagrams(self, diagrams: Sequence[Tuple[int, PersistenceDiagram]]) -> pd.DataFrame:
        """다이어그램 CSV: t,k,birth,death,essential,trivial"""
        frames = [
            pd.DataFrame({
                't': t,
                'k': diagram.k,
                'birth': diagram.births,
                'death': diagram.deaths,
                'essential': diagram.essential.astype(int),
                'trivial': diagram.trivial.astype(int),
            })
            for t, diagram in diagrams
        ]
        if not frames:
            return pd.DataFrame(columns=['t', 'k', 'birth', 'death', 'essential', 'trivial'])
        return pd.concat(frames, ignore_index=True)


# 싱글톤 인스턴스
persistence_service = PersistenceService()
