"""
위상적 구조변화 탐지 CLI

점구름 시계열의 지속성 다이어그램 특징에 CUSUM 검정을 적용하는 배치 명령 모음
"""
import argparse
import logging
import sys
from typing import List, Optional

from topobreak import __version__
from topobreak.cli.commands import approx, critvals, simulate, stability, test
from topobreak.config import LOG_LEVEL
from topobreak.exceptions import ConfigError, InputError, NumericError

logger = logging.getLogger(__name__)

# 종료 코드
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON 실험 설정 파일")
    common.add_argument("--seed", type=int, default=None, help="마스터 시드 덮어쓰기")
    common.add_argument("--reps", type=int, default=None, help="복제 수 / 몬테카를로 표본 수 덮어쓰기")
    common.add_argument("--out", type=str, default=None, help="출력 디렉토리")
    common.add_argument("--threads", type=int, default=None, help="병렬 작업 수")
    common.add_argument("--log-level", type=str, default=LOG_LEVEL, help="로그 레벨 (DEBUG, INFO, ...)")

    parser = argparse.ArgumentParser(
        prog="topobreak",
        description="점구름 시계열의 위상적 구조변화 탐지",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # 서브커맨드 등록
    for module in (stability, critvals, test, approx, simulate):
        module.register(_SharedFlags(subparsers, common))
    return parser


class _SharedFlags:
    """add_parser 호출마다 공통 플래그를 상속"""

    def __init__(self, subparsers, parent: argparse.ArgumentParser):
        self._subparsers = subparsers
        self._parent = parent

    def add_parser(self, name: str, **kwargs) -> argparse.ArgumentParser:
        return self._subparsers.add_parser(name, parents=[self._parent], **kwargs)


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        manifest = args.handler(args)
    except (ConfigError, InputError) as e:
        logger.error("설정/입력 오류: %s", e)
        return EXIT_CONFIG
    except NumericError as e:
        logger.error("수치 오류: %s", e)
        return EXIT_NUMERIC
    except OSError as e:
        logger.error("입출력 오류: %s", e)
        return EXIT_IO
    except Exception as e:
        logger.exception("처리되지 않은 오류: %s", e)
        return EXIT_FAILURE

    logger.info("산출물: %s", ", ".join(manifest.artifacts))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
