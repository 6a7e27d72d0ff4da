# ----------------------------------------------------------------------------------------------------
# 작성목적 : 유틸리티 함수 모음. 공통으로 사용되는 헬퍼 함수들을 정의합니다.
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 시드 파생, JSON 직렬화, YAML 로드 등 유틸리티 함수 분리 | 시스템
# 2026-04-20 | 기능 추가 | 출력 디렉토리/작업자 수를 환경변수로 관리 | 시스템
# 2026-05-11 | 문서 보완 | JSON 실수 표현(최단 왕복 repr) 명시 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import json
import math
import logging
from typing import Any, Dict, Optional

import numpy as np
import yaml

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
SIGNIFICANT_DIGITS = 9


def derive_seed(master_seed: int, *counters: int) -> int:
    """
    마스터 시드와 카운터(반복 번호 등)로부터 독립 시드를 파생

    실행 순서(스레드 스케줄링)와 무관하게 같은 (master_seed, counters)는
    항상 같은 시드를 돌려줍니다.
    """
    sequence = np.random.SeedSequence([int(master_seed), *[int(c) for c in counters]])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def derive_rng(master_seed: int, *counters: int) -> np.random.Generator:
    """파생 시드로 독립 난수 스트림 생성"""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *[int(c) for c in counters]]))


def draw_master_seed() -> int:
    """--seed 미지정 시 사용할 마스터 시드 추출 (보고서에 그대로 기록됨)"""
    return int(np.random.SeedSequence().entropy % (2**31 - 1))


def format_number(value: Any) -> str:
    """사람이 읽는 출력용 숫자 포맷 (유효숫자 9자리)"""
    if value is None:
        return "-"
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def to_jsonable(obj: Any) -> Any:
    """
    numpy 타입/비유한 실수를 JSON 호환 값으로 변환

    유한 실수는 float 그대로 두어 json이 float.__repr__ (다시 읽으면 같은 비트의
    double이 되는 가장 짧은 10진 표현)으로 기록하게 하고, inf/nan은 문자열로 기록합니다.
    따라서 저장된 수치는 정밀도 손실 없이 왕복되며, 자릿수를 고정한 문자열 변환은 하지 않습니다.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def save_json(payload: Dict[str, Any], path: str) -> str:
    """결과를 JSON 파일로 저장"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, ensure_ascii=False, indent=4)
    logger.info(f"JSON 저장 완료: {path}")
    return path


def load_yaml(path: str) -> Dict[str, Any]:
    """YAML 설정 파일 로드"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"설정 파일을 찾을 수 없습니다: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML 파싱 오류: {path} - {e}")

    if not isinstance(data, dict):
        raise ConfigError(f"설정 파일 최상위는 매핑이어야 합니다: {path}")
    logger.debug(f"설정 파일 로드 완료: {path}")
    return data


def get_output_dir(override: Optional[str] = None) -> str:
    """
    출력 디렉토리 결정
    우선순위: 인자 > UNCERTAINTY_OUTPUT_DIR 환경변수 > 'output'
    """
    if override:
        return override
    return os.getenv("UNCERTAINTY_OUTPUT_DIR", "output")


def get_max_workers(override: Optional[int] = None) -> int:
    """병렬 작업자 수 결정 (인자 > UNCERTAINTY_MAX_WORKERS > CPU 수)"""
    if override is not None and override > 0:
        return int(override)
    env_value = os.getenv("UNCERTAINTY_MAX_WORKERS")
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"UNCERTAINTY_MAX_WORKERS 값이 정수가 아님: {env_value}")
    return max(1, os.cpu_count() or 1)
