import os

# 테스트에서는 디스크 캐시/실행 이력을 쓰지 않음 (topobreak import 전에 설정)
os.environ["TOPOBREAK_CACHE_DB"] = ""

import numpy as np
import pytest

from topobreak.models.schemas import DomainM, PointCloud


@pytest.fixture
def unit_domain():
    return DomainM.unit(2)


@pytest.fixture
def unit_square(unit_domain):
    """단위 정사각형 꼭짓점 (반시계 방향)"""
    points = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return PointCloud(points=points, domain=unit_domain)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_cloud(unit_domain, rng):
    def make(r: int) -> PointCloud:
        return PointCloud(points=rng.uniform(0.0, 1.0, size=(r, 2)), domain=unit_domain)
    return make


@pytest.fixture
def small_config_dict():
    """CLI/파이프라인 테스트용 소형 설정"""
    return {
        "schema_version": 1,
        "run_id": "tiny",
        "seed": 42,
        "replications": 2,
        "threads": 1,
        "generator": {
            "generator": "IIDClouds",
            "n": 30,
            "domain": {"d": 2, "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
            "r": 4,
        },
        "filtration": {"kind": "VietorisRips", "dim_cap": 1},
        "feature_dim": 0,
        "feature_map": [
            {"component": "TotalPersistence", "gamma": 1.0},
            {"component": "TotalPersistence", "gamma": "inf"},
        ],
        "test": {"grid": 1024, "n_rep": 1000},
        "stability": {"n_samples": 2000},
        "approx": {"m_list": [1, 2, 4], "n_mc": 200},
        "critvals": {"grid": 1024, "n_rep": 1000},
        "outputs": "output/tiny",
    }
