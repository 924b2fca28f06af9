"""Configuration settings"""
import os
from pathlib import Path
from dotenv import load_dotenv

# .env 파일 로드
load_dotenv()

# 프로젝트 루트 경로
PROJECT_ROOT = Path(__file__).parent.parent

# 데이터 디렉토리
DATA_DIR = Path(os.getenv("TOPOBREAK_DATA_DIR", str(PROJECT_ROOT / "data")))
CACHE_DIR = DATA_DIR / "cache"

# 한계분포 캐시 DB 경로 (빈 문자열이면 디스크 캐시 사용 안 함)
CACHE_DB_PATH = os.getenv("TOPOBREAK_CACHE_DB", str(CACHE_DIR / "limit_law.db"))

# 실행 설정
LOG_LEVEL = os.getenv("TOPOBREAK_LOG_LEVEL", "INFO")
DEFAULT_THREADS = int(os.getenv("TOPOBREAK_THREADS", 1))

# 브라운 브리지 시뮬레이션 기본값
BRIDGE_GRID = int(os.getenv("TOPOBREAK_BRIDGE_GRID", 2 ** 12))
BRIDGE_REPS = int(os.getenv("TOPOBREAK_BRIDGE_REPS", 20000))
BRIDGE_CHUNK = 256  # 재현성 단위: 청크 크기는 병렬도와 무관하게 고정

# 분위수 수준
QUANTILE_LEVELS = (0.90, 0.95, 0.99)

# 정규근사는 ℓ이 충분히 클 때만 허용
NORMAL_APPROX_MIN_ELL = 20

# 장기공분산 역행렬 안정화
RIDGE_CONDITION_THRESHOLD = 1e10
RIDGE_FACTOR = 1e-8

# 최소포함구 (Welzl) 수치 허용오차
PINV_RTOL = 1e-12
BALL_CONTAINMENT_RTOL = 1e-12

# 필트레이션 상한 T 비교 허용오차 (상대)
CAP_RTOL = 1e-12

# 안정성 지수 추정 기본값 (diam(M) 배수)
STABILITY_GRID_PER_DECADE = 24
STABILITY_GRID_RANGE = (1e-4, 1e-1)
STABILITY_FIT_WINDOW = (1e-4, 1e-2)
STABILITY_MIN_SAMPLES = 1000
STABILITY_CHUNK = 2000
UPPER_BOUND_SLACK = 1.25

# m-근사 가중치 t_m ≍ m^{-(1+δ)}
DEFAULT_COUPLING_DELTA = 0.1

# CSV 출력 (바이트 동일성 보장을 위해 17자리)
CSV_FLOAT_FORMAT = "%.17g"

# 설정 스키마 버전
CONFIG_SCHEMA_VERSION = 1
