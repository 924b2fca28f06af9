"""SQLite models for the limit-law cache and run registry"""
import os
from datetime import datetime
from functools import lru_cache

from sqlalchemy import (
    Column, DateTime, Float, Integer, JSON, String, UniqueConstraint, create_engine
)
from sqlalchemy.orm import declarative_base, sessionmaker

from topobreak.config import CACHE_DB_PATH

Base = declarative_base()


class LimitLawTable(Base):
    """Λ(ℓ)/Ω(ℓ) 시뮬레이션 결과 캐시"""
    __tablename__ = 'limit_law_tables'
    __table_args__ = (
        UniqueConstraint('statistic', 'ell', 'grid', 'n_rep', 'seed', name='uq_limit_law_key'),
    )

    id = Column(Integer, primary_key=True, autoincrement=True)
    statistic = Column(String(20), nullable=False, index=True)  # Lambda, Omega
    ell = Column(Integer, nullable=False)
    grid = Column(Integer, nullable=False)
    n_rep = Column(Integer, nullable=False)
    seed = Column(String(24), nullable=False)  # 64비트 시드는 문자열로 보관
    quantiles = Column(JSON, nullable=False)   # {"0.95": 1.84, ...}
    mean = Column(Float, nullable=False)
    variance = Column(Float, nullable=False)
    samples = Column(JSON, nullable=False)     # 오름차순 표본
    created_at = Column(DateTime, default=datetime.now)


class RunRecord(Base):
    """CLI 실행 이력"""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(200), nullable=False, index=True)
    command = Column(String(20), nullable=False)
    seed = Column(String(24))
    status = Column(String(20), default="running")  # running, ok, failed
    output_dir = Column(String(500))
    message = Column(String(1000))
    started_at = Column(DateTime, default=datetime.now)
    finished_at = Column(DateTime)


@lru_cache(maxsize=None)
def get_engine(db_path: str = CACHE_DB_PATH):
    """데이터베이스 엔진 생성 (경로별 1개)"""
    directory = os.path.dirname(db_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    engine = create_engine(f"sqlite:///{db_path}", echo=False)
    Base.metadata.create_all(engine)
    return engine


def get_session(db_path: str = CACHE_DB_PATH):
    """데이터베이스 세션 생성"""
    Session = sessionmaker(bind=get_engine(db_path))
    return Session()
