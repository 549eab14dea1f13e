# core/exceptions.py
"""
[도메인 예외 계층]

모든 도메인 예외는 XarbError를 뿌리로 삼는다.
각 예외는 CLI가 그대로 사용할 종료 코드(exit_code)를 들고 다닌다.

    0: 성공
    1: 사용법/설정 오류 (ConfigError, UsageError, ModelDomainError)
    2: 데이터 오류 (DataError 계열, FileOperationError)
    3: 내부 오류 (XarbError를 상속하지 않은 모든 예외)

사용 예:
    try:
        run_subcommand(...)
    except XarbError as e:
        return e.exit_code
"""
from __future__ import annotations

from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class XarbError(Exception):
    """모든 도메인 예외의 기본 클래스"""

    exit_code: int = EXIT_INTERNAL


# =============================================================================
# 설정 / 사용법
# =============================================================================
class ConfigError(XarbError):
    """시나리오, 탐지기 설정 등 구성 파일이 잘못되었을 때"""

    exit_code = EXIT_USAGE


class UsageError(XarbError):
    """명령행 인자가 잘못되었을 때 (argparse가 exit(2) 대신 이 예외를 던진다)"""

    exit_code = EXIT_USAGE


# =============================================================================
# 모델 정의역
# =============================================================================
class ModelDomainError(XarbError, ValueError):
    """
    모델 연산의 사전 조건이 깨졌을 때.
    어느 파라미터가 문제인지 parameter에 담는다.
    """

    exit_code = EXIT_USAGE

    def __init__(self, message: str, parameter: Optional[str] = None):
        super().__init__(message if parameter is None else f"{parameter}: {message}")
        self.parameter = parameter


class DegenerateDenominatorError(ModelDomainError):
    """폐형식 해의 분모가 0 이하가 되어 기댓값이 발산할 때"""


class NoFiniteThresholdError(ModelDomainError):
    """임계값이 정의되지 않거나 무한대일 때 (예: C^BR = 0, M <= 0)"""


class HypothesisViolatedError(ModelDomainError):
    """따름정리의 가정 1/λ > Δp 가 성립하지 않을 때"""


# =============================================================================
# 데이터
# =============================================================================
class DataError(XarbError):
    """입력 데이터가 스키마나 불변식을 어겼을 때"""

    exit_code = EXIT_DATA


class SchemaViolationError(DataError):
    """
    한 줄(레코드)이 스키마를 위반했다.
    line_no는 1부터 센 파일 줄 번호 (알 수 없으면 None)
    """

    def __init__(self, reason: str, line_no: Optional[int] = None):
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{reason}")
        self.reason = reason
        self.line_no = line_no


class AmbiguousEndpointsError(DataError):
    """한 트랜잭션의 최초 입력/최종 출력 자산을 유일하게 정할 수 없을 때"""

    def __init__(self, chain: str, tx_hash: str, detail: str):
        super().__init__(f"ambiguous endpoints in {chain}:{tx_hash} ({detail})")
        self.chain = chain
        self.tx_hash = tx_hash


class DegenerateSampleError(DataError):
    """표본 분산이 0이라 통계량을 정의할 수 없을 때"""
