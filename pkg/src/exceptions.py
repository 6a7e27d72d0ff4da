# ----------------------------------------------------------------------------------------------------
# 작성목적 : 불확실성 모델링 프레임워크 공통 예외 정의
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 모듈별 ValueError 분산 사용을 예외 계층으로 통합 | 시스템
# 2026-04-11 | 기능 추가 | 시계열 파일 오류 위치(행/열) 보고용 MalformedSeriesError 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

from typing import Optional


class UncertaintyFrameworkError(Exception):
    """프레임워크 최상위 예외"""


class DomainError(UncertaintyFrameworkError, ValueError):
    """입력값이 정의역을 벗어난 경우 (예: η ∉ (0,1), s ≤ 2)"""


class ConfigError(DomainError):
    """설정 파일(YAML) 파싱/검증 실패"""


class DimensionMismatchError(DomainError):
    """인스턴스 벡터 차원이 환경/결정규칙 공간과 다른 경우"""


class EmptySequenceError(DomainError):
    """빈 학습 시퀀스로 경험적 위험을 계산하려는 경우"""


class SeriesTooShortError(DomainError):
    """학습 시퀀스로 변환하기에 시계열이 너무 짧은 경우"""

    def __init__(self, length: int):
        super().__init__(f"series too short: 최소 2개 시점이 필요합니다 (현재 {length}개)")
        self.length = length


class NonUniformSpacingError(DomainError):
    """고정 Δt 오일러 구성을 위한 등간격 조건 위반"""


class MalformedSeriesError(DomainError):
    """시계열 파일 형식 오류 (행/열 위치 포함)"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        location = ""
        if line is not None:
            location += f" (line {line}"
            location += f", column '{column}')" if column is not None else ")"
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class IntegrationError(UncertaintyFrameworkError, ArithmeticError):
    """적분 중 유한하지 않은 값이 발생한 경우"""


class DivergenceError(UncertaintyFrameworkError, ArithmeticError):
    """시뮬레이션 상태가 발산한 경우 (발산 단계 포함)"""

    def __init__(self, step: int, message: str = "non-finite state"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class InfiniteVCDimensionError(DomainError):
    """VC 차원이 무한대여서 경계가 무의미한 경우"""

    def __init__(self, family: str = ""):
        suffix = f" ({family})" if family else ""
        super().__init__(f"bounds vacuous for infinite VC dimension{suffix}")


class UnknownFamilyError(DomainError):
    """레지스트리에 없는 함수족"""


class ShatteringLimitError(DomainError):
    """분할(shattering) 검사 점집합 크기 제한 초과"""


class OracleUnavailableError(UncertaintyFrameworkError):
    """기대위험 최소화 규칙 h₀ 오라클을 구성할 수 없는 경우"""
