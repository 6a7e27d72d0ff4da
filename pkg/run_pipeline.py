#!/usr/bin/env python3
# ----------------------------------------------------------------------------------------------------
# 작성목적 : 불확실성 모델링 프레임워크 CLI (경계 계산, ODE 식별, 시뮬레이션, 검증 실험, VC 조회)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 하위 명령 bound / identify / simulate / validate / vc 구성 | 시스템
# 2026-04-20 | 기능 추가 | report 명령, 공통 플래그(--json, --seed, --log-level, --output-dir) 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import sys
import json
import logging
import argparse
from typing import List, Optional

# 환경변수 로드
from dotenv import load_dotenv
load_dotenv()

from src.commands import (cmd_bound, cmd_identify, cmd_report, cmd_simulate, cmd_validate, cmd_vc,
                          format_text)
from src.exceptions import DomainError
from src.utils import get_output_dir, save_json, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def setup_logging(level_name: Optional[str], output_dir: str) -> None:
    """로깅 설정 (stderr + <output>/pipeline.log)"""
    level_name = (level_name or os.getenv("UNCERTAINTY_LOG_LEVEL", "INFO")).upper()
    os.makedirs(output_dir, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format='%(asctime)s | %(levelname)s | %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr),
            logging.FileHandler(os.path.join(output_dir, 'pipeline.log'), encoding='utf-8')
        ],
        force=True
    )


def build_parser() -> argparse.ArgumentParser:
    """CLI 파서 구성"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--json', action='store_true', help="JSON 보고서를 표준출력으로 출력")
    common.add_argument('--seed', type=int, default=None, help="마스터 시드 (미지정 시 추출 후 보고서에 기록)")
    common.add_argument('--log-level', default=None, help="로그 레벨 (기본값: UNCERTAINTY_LOG_LEVEL 또는 INFO)")
    common.add_argument('--output-dir', default=None, help="출력 디렉토리 (기본값: UNCERTAINTY_OUTPUT_DIR 또는 output)")

    parser = argparse.ArgumentParser(description="복잡 공학 시스템 불확실성 모델링 도구")
    subparsers = parser.add_subparsers(dest='command', required=True)

    bound = subparsers.add_parser('bound', parents=[common], help="ζ, 적용성 경계 C, 보장 편차 φ 계산")
    bound.add_argument('--n', type=int, required=True, help="학습 시퀀스 길이 N")
    bound.add_argument('--q', type=float, required=True, help="손실 함수족 VC 차원 q")
    bound.add_argument('--eta', type=float, required=True, help="η (신뢰수준 1-η)")
    bound.add_argument('--remp', type=float, default=0.0, help="경험적 위험 R_emp (기본값: 0)")
    bound.add_argument('--m', type=float, default=None, help="WPI(1) 손실 상한 M (UM1)")
    bound.add_argument('--s', type=float, default=4.0, help="WPI(2) 모멘트 차수 s (기본값: 4)")
    bound.add_argument('--tau', type=float, default=None, help="WPI(2) 비율 상한 τ (UM2)")
    bound.add_argument('--q-provenance', default='user_declared', help="q 출처 표기 (기본값: user_declared)")
    bound.set_defaults(handler=cmd_bound)

    ident = subparsers.add_parser('identify', parents=[common], help="시계열 파일에서 ODE 파라미터 식별")
    ident.add_argument('--input', required=True, help="시계열 파일 (헤더, 첫 열 time)")
    ident.add_argument('--model', required=True, choices=['linear_decay', 'linear_substrate', 'monod'])
    ident.add_argument('--dt', type=float, default=None, help="Δt (기본값: 시계열 간격)")
    ident.add_argument('--restarts', type=int, default=16, help="다중 시작 횟수 (기본값: 16)")
    ident.add_argument('--max-iter', type=int, default=4000, help="재시작당 최대 반복 (기본값: 4000)")
    ident.add_argument('--lower', type=float, nargs='+', default=None, help="파라미터 하한")
    ident.add_argument('--upper', type=float, nargs='+', default=None, help="파라미터 상한")
    ident.add_argument('--residuals', action='store_true', help="잔차 목록 포함")
    ident.set_defaults(handler=cmd_identify)

    sim = subparsers.add_parser('simulate', parents=[common], help="오일러 궤적 생성")
    sim.add_argument('--model', required=True, choices=['linear_decay', 'linear_substrate', 'monod'])
    sim.add_argument('--p', type=float, nargs='+', required=True, help="모델 파라미터")
    sim.add_argument('--x0', type=float, nargs='+', required=True, help="초기 상태")
    sim.add_argument('--steps', type=int, required=True, help="오일러 단계 수")
    sim.add_argument('--dt', type=float, default=0.1, help="Δt (기본값: 0.1)")
    sim.add_argument('--noise', type=float, default=0.0, help="목표 변수 균등 측정 잡음 반폭 (기본값: 0)")
    sim.add_argument('--yield-coefficient', type=float, default=0.6, help="미생물 수율 Y (2상태 모델)")
    sim.add_argument('--decay', type=float, default=0.05, help="미생물 사멸률 k_d (2상태 모델)")
    sim.add_argument('--output', default=None, help="시계열 저장 경로 (.csv / .tsv)")
    sim.set_defaults(handler=cmd_simulate)

    val = subparsers.add_parser('validate', parents=[common], help="커버리지 검증 실험 실행")
    val.add_argument('--config', required=True, help="실험 설정 YAML")
    val.add_argument('--replications', type=int, default=None, help="반복 수 재정의")
    val.add_argument('--workers', type=int, default=None, help="병렬 작업자 수 (기본값: UNCERTAINTY_MAX_WORKERS)")
    val.set_defaults(handler=cmd_validate)

    vc = subparsers.add_parser('vc', parents=[common], help="VC 차원 조회")
    vc.add_argument('--family', default='perceptron',
                    help="레지스트리/탐색 함수족 (perceptron, linear_span, affine, polynomial_loss, sine, right_ray)")
    vc.add_argument('--n', type=int, default=0, help="함수족 크기 파라미터 n")
    vc.add_argument('--estimate', action='store_true', help="분할 탐색으로 하한 추정")
    vc.add_argument('--q-max', type=int, default=6, help="하한 탐색 최대 점 수 (기본값: 6)")
    vc.add_argument('--budget', type=int, default=20000, help="이분당 파라미터 추출 예산 (기본값: 20000)")
    vc.add_argument('--witness', action='store_true', help="증인 파라미터 출력")
    vc.add_argument('--space', default=None,
                    choices=['affine', 'polynomial', 'linear_span', 'sine', 'perceptron', 'ode_euler'],
                    help="경계 계산용 q를 구할 결정규칙 공간")
    vc.add_argument('--degree', type=int, default=None, help="polynomial 공간 차수")
    vc.add_argument('--basis', nargs='+', default=None, help="linear_span 기저 이름")
    vc.add_argument('--model', default=None, help="ode_euler 공간 모델")
    vc.add_argument('--dim', type=int, default=1, help="인스턴스 차원 (기본값: 1)")
    vc.add_argument('--policy', default='auto', choices=['auto', 'registry', 'user_declared', 'parameter_count'])
    vc.add_argument('--value', type=float, default=None, help="user_declared q 값")
    vc.set_defaults(handler=cmd_vc)

    report = subparsers.add_parser('report', parents=[common], help="종합 검증 보고서 생성")
    report.add_argument('--replications', type=int, default=None, help="커버리지 실험 반복 수 재정의")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """메인 실행 함수 (종료 코드 반환: 0 성공, 1 실패, 2 정의역/사용 오류)"""
    parser = build_parser()
    args = parser.parse_args(argv)
    output_dir = get_output_dir(args.output_dir)
    setup_logging(args.log_level, output_dir)

    try:
        envelope = args.handler(args)
    except DomainError as e:
        logger.error(f"입력 오류: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.info("사용자에 의해 중단되었습니다.")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"{args.command} 실행 중 오류: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    report = to_jsonable(envelope.model_dump())
    save_json(report, os.path.join(output_dir, "json", f"{args.command}_report.json"))
    if args.json:
        print(json.dumps(report, ensure_ascii=False, indent=4))
    else:
        print(format_text(envelope))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
