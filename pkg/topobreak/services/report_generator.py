"""Run artifacts: CSV, JSON, manifest, HTML summary and run registry"""
import json
import logging
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from jinja2 import Environment, select_autoescape

from topobreak import __version__
from topobreak.config import CACHE_DB_PATH, CSV_FLOAT_FORMAT
from topobreak.models.database import RunRecord, get_session
from topobreak.models.enums import RunStatus
from topobreak.models.schemas import RunManifest

logger = logging.getLogger(__name__)


SUMMARY_TEMPLATE = """<!DOCTYPE html>
<html lang="ko">
<head>
<meta charset="utf-8">
<title>{{ manifest.command }} - {{ run_id }}</title>
<style>
  body { font-family: sans-serif; margin: 2em; }
  table { border-collapse: collapse; margin-bottom: 1.5em; }
  th, td { border: 1px solid #999; padding: 4px 10px; text-align: left; }
  th { background: #4472C4; color: #fff; }
</style>
</head>
<body>
<h1>{{ manifest.command }} 실행 요약</h1>
<p>run_id: {{ run_id }} / 버전 {{ manifest.library_version }} / {{ "%.2f"|format(manifest.wall_clock_seconds) }}초</p>

<h2>결과</h2>
<table>
<tr><th>항목</th><th>값</th></tr>
{% for key, value in results.items() %}
<tr><td>{{ key }}</td><td>{{ value }}</td></tr>
{% endfor %}
</table>

<h2>파생 상수</h2>
<table>
<tr><th>항목</th><th>값</th></tr>
{% for key, value in manifest.derived.items() %}
<tr><td>{{ key }}</td><td>{{ value }}</td></tr>
{% endfor %}
</table>

<h2>산출물</h2>
<ul>
{% for name in manifest.artifacts %}
<li>{{ name }}</li>
{% endfor %}
</ul>
</body>
</html>
"""


class RunReporter:
    """
    한 번의 CLI 실행에 대한 산출물 기록

    CSV 본문은 시드와 설정에만 의존하고, 시각 정보는 manifest.json에만 남긴다.
    """

    def __init__(self, command: str, run_id: str, output_dir: Path, seed: Optional[int] = None,
                 db_path: Optional[str] = CACHE_DB_PATH):
        self.command = command
        self.run_id = run_id
        self.output_dir = Path(output_dir)
        self.seed = seed
        self.db_path = db_path or None
        self.artifacts: List[str] = []
        self.started_at = datetime.now()
        self._clock = time.perf_counter()
        self._record_id: Optional[int] = None

    def start(self) -> "RunReporter":
        self.output_dir.mkdir(parents=True, exist_ok=True)
        if self.db_path is not None:
            session = get_session(self.db_path)
            try:
                record = RunRecord(
                    run_id=self.run_id,
                    command=self.command,
                    seed=None if self.seed is None else str(self.seed),
                    status=RunStatus.RUNNING.value,
                    output_dir=str(self.output_dir),
                    started_at=self.started_at,
                )
                session.add(record)
                session.commit()
                self._record_id = record.id
            finally:
                session.close()
        logger.info("실행 시작: %s (run_id=%s, out=%s)", self.command, self.run_id, self.output_dir)
        return self

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.output_dir / name
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        self.artifacts.append(name)
        logger.debug("CSV 저장: %s (%d행)", path, len(frame))
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.output_dir / name
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, default=str), encoding="utf-8")
        self.artifacts.append(name)
        return path

    def finish(self, config: Dict[str, Any], derived: Dict[str, Any],
               results: Optional[Dict[str, Any]] = None) -> RunManifest:
        """manifest.json, summary.html 작성 후 실행 이력 완료 처리"""
        finished_at = datetime.now()
        manifest = RunManifest(
            command=self.command,
            config=config,
            derived=derived,
            started_at=self.started_at.isoformat(),
            finished_at=finished_at.isoformat(),
            wall_clock_seconds=time.perf_counter() - self._clock,
            artifacts=self.artifacts + ["manifest.json", "summary.html"],
            library_version=__version__,
        )
        try:
            (self.output_dir / "manifest.json").write_text(
                manifest.model_dump_json(indent=2), encoding="utf-8"
            )
            self.render_summary(manifest, results or {})
        except Exception as e:
            self.fail(str(e))
            raise
        self._update_record(RunStatus.OK, finished_at)
        logger.info("실행 완료: %s (%.2f초)", self.command, manifest.wall_clock_seconds)
        return manifest

    def render_summary(self, manifest: RunManifest, results: Dict[str, Any]) -> Path:
        env = Environment(autoescape=select_autoescape(default=True))
        html = env.from_string(SUMMARY_TEMPLATE).render(
            manifest=manifest, run_id=self.run_id, results=results
        )
        path = self.output_dir / "summary.html"
        path.write_text(html, encoding="utf-8")
        return path

    def fail(self, message: str) -> None:
        self._update_record(RunStatus.FAILED, datetime.now(), message)

    def _update_record(self, status: RunStatus, finished_at: datetime, message: Optional[str] = None) -> None:
        if self.db_path is None or self._record_id is None:
            return
        session = get_session(self.db_path)
        try:
            record = session.get(RunRecord, self._record_id)
            if record is not None:
                record.status = status.value
                record.finished_at = finished_at
                record.message = None if message is None else message[:1000]
                session.commit()
        finally:
            session.close()
