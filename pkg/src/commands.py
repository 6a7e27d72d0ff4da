# ----------------------------------------------------------------------------------------------------
# 작성목적 : CLI 하위 명령 처리기 (bound, identify, simulate, validate, vc, report)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | CLI 명령 처리기 작성, 보고서 봉투(ReportEnvelope) 반환 | 시스템
# 2026-04-20 | 기능 추가 | report 명령 및 텍스트 출력 포맷(유효숫자 9자리) 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

"""
CLI 명령 처리기
각 cmd_* 함수는 argparse 인자를 받아 ReportEnvelope를 반환합니다.
모든 난수는 봉투에 기록되는 하나의 마스터 시드에서 파생됩니다.
"""

import argparse
import logging
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .erm_core import build_rule_space
from .exceptions import DomainError, SeriesTooShortError
from .mc_harness import load_experiment_config, run_coverage_experiment, write_coverage_outputs
from .ode_bridge import (TimeSeries, biomass_dynamics, identify, load_time_series, make_model,
                         save_time_series, series_to_training_sequence, simulate)
from .risk_bounds import WPI1, WPI2, Confidence, gamma, phi1, phi2, zeta
from .schemas import OptimizerConfig, ReportEnvelope, RuleSpaceSpec, VCPolicySpec
from .utils import TOOL_VERSION, derive_rng, draw_master_seed, format_number, get_output_dir
from .vc_dim import (affine_family, estimate_vc_lower_bound, known_vc, perceptron_family,
                     right_ray_family, sine_family, vc_for_bounds)

logger = logging.getLogger(__name__)


def resolve_seed(args: argparse.Namespace) -> int:
    """--seed 값 또는 새로 추출한 시드 (어느 쪽이든 봉투에 기록)"""
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = draw_master_seed()
        logger.info(f"--seed 미지정: 마스터 시드 {seed} 사용")
    return int(seed)


def _arguments(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: value for key, value in vars(args).items() if key not in ("handler", "json")}


def _envelope(command: str, args: argparse.Namespace, payload: Dict[str, Any],
              seeds: Optional[Dict[str, int]] = None,
              provenance: Optional[Dict[str, Any]] = None) -> ReportEnvelope:
    return ReportEnvelope(tool_version=TOOL_VERSION, command=command, arguments=_arguments(args),
                          seeds=seeds or {}, payload=payload, provenance=provenance or {})


def cmd_bound(args: argparse.Namespace) -> ReportEnvelope:
    """ζ, C, φ (UM1: --m, UM2: --s --tau) 계산"""
    Confidence(args.eta)
    if args.m is None and args.tau is None:
        raise DomainError("--m (UM1) 또는 --s/--tau (UM2) 중 하나 이상이 필요합니다")

    provenance_q = getattr(args, "q_provenance", None) or "user_declared"
    payload: Dict[str, Any] = {
        "n": args.n,
        "q": args.q,
        "eta": args.eta,
        "r_emp": args.remp,
        "zeta": zeta(args.n, args.q, args.eta),
    }
    provenance: Dict[str, Any] = {"q": provenance_q}
    if args.m is not None:
        deviation = phi1(args.remp, args.n, args.q, args.eta, WPI1(args.m), provenance_q)
        payload["UM1"] = {"M": args.m, "bound_c": deviation.bound_c, "phi": deviation.value,
                          "vacuous": deviation.vacuous}
        provenance["wpi1"] = "user_declared"
    if args.tau is not None:
        deviation = phi2(args.remp, args.n, args.q, args.eta, WPI2(args.s, args.tau), provenance_q)
        payload["UM2"] = {"s": args.s, "tau": args.tau, "gamma": gamma(args.s),
                          "bound_c": deviation.bound_c, "phi": deviation.value,
                          "vacuous": deviation.vacuous}
        provenance["wpi2"] = "user_declared"
        if deviation.vacuous:
            logger.warning(f"UM2 경계가 무의미합니다: γτ√ζ = {deviation.bound_c:.6g} ≥ 1")
    return _envelope("bound", args, payload, provenance=provenance)


def cmd_identify(args: argparse.Namespace) -> ReportEnvelope:
    """시계열 파일에서 ODE 파라미터 식별"""
    seed = resolve_seed(args)
    series = load_time_series(args.input)
    if len(series) < 2:
        raise SeriesTooShortError(len(series))
    dt = args.dt if args.dt is not None else series.dt
    model = make_model(args.model, dt)
    optimizer = OptimizerConfig(restarts=args.restarts, max_iter=args.max_iter, seed=seed)
    result = identify(model, series, optimizer, args.lower, args.upper)

    payload: Dict[str, Any] = {
        "model": model.name,
        "dt": dt,
        "n_samples": result.n_samples,
        "p_emp": result.p_emp.tolist(),
        "r_emp": result.empirical_risk_at_min,
        "j_value": result.n_samples * result.empirical_risk_at_min,
        "method": result.method,
        "converged": result.converged,
        "iterations": result.iterations,
        "flags": list(result.flags),
        "sequence_provenance": "time_series",
        "iid_condition": "C'.3",
    }
    if args.residuals:
        seq = series_to_training_sequence(series, model.target_index)
        payload["residuals"] = (seq.outcomes - result.rule(seq.instances)).tolist()
    return _envelope("identify", args, payload, seeds={"master_seed": seed},
                     provenance={"input": args.input, "ergodicity": "assumed, not tested"})


def cmd_simulate(args: argparse.Namespace) -> ReportEnvelope:
    """오일러 시뮬레이션 (선택: 목표 변수 균등 측정 잡음)"""
    seed = resolve_seed(args)
    model = make_model(args.model, args.dt)
    aux = biomass_dynamics(model, args.p, args.yield_coefficient, args.decay) if model.state_dim == 2 else None
    series = simulate(model, args.p, args.x0, args.steps, aux)

    if args.noise > 0:
        states = np.array(series.states)
        rng = derive_rng(seed, 1)
        states[:, model.target_index] += rng.uniform(-args.noise, args.noise, len(series))
        series = TimeSeries(series.times, states, series.state_names)

    output = None
    if args.output:
        output = save_time_series(series, args.output)

    payload = {
        "model": model.name,
        "dt": model.dt,
        "p": list(args.p),
        "x0": list(args.x0),
        "steps": args.steps,
        "noise_half_width": args.noise,
        "rows": len(series),
        "output": output,
        "table": series.to_frame().to_dict(orient="records"),
    }
    return _envelope("simulate", args, payload, seeds={"master_seed": seed})


def cmd_validate(args: argparse.Namespace) -> ReportEnvelope:
    """실험 설정 파일로 커버리지 실험 실행, JSON 요약 + CSV 상세 저장"""
    cfg = load_experiment_config(args.config)
    updates: Dict[str, Any] = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.replications is not None:
        updates["replications"] = args.replications
    if updates:
        cfg = cfg.model_copy(update=updates)

    result = run_coverage_experiment(cfg, args.workers)
    files = write_coverage_outputs(result, get_output_dir(args.output_dir))
    payload = result.to_dict()
    payload["files"] = files
    provenance = {"vc": result.vc.get("provenance"),
                  "wpi": {model: value.get("provenance") for model, value in result.wpi.items()},
                  "config": args.config}
    return _envelope("validate", args, payload, seeds={"master_seed": cfg.master_seed}, provenance=provenance)


_SEARCH_FAMILIES = {
    "right_ray": lambda n: right_ray_family(),
    "affine": lambda n: affine_family(n or 2),
    "perceptron": lambda n: perceptron_family(n or 2),
    "sine": lambda n: sine_family(),
}


def cmd_vc(args: argparse.Namespace) -> ReportEnvelope:
    """VC 차원 조회: 레지스트리 / 하한 탐색 / 경계용 q 정책"""
    seeds: Dict[str, int] = {}
    if args.space:
        spec = RuleSpaceSpec(kind=args.space, degree=args.degree,
                             basis=args.basis, model=args.model)
        space = build_rule_space(spec, args.dim)
        spec_vc = vc_for_bounds(space, VCPolicySpec(kind=args.policy, value=args.value))
    elif args.estimate:
        if args.family not in _SEARCH_FAMILIES:
            raise DomainError(f"하한 탐색을 지원하지 않는 함수족: {args.family} (가능: {sorted(_SEARCH_FAMILIES)})")
        seed = resolve_seed(args)
        seeds["master_seed"] = seed
        family = _SEARCH_FAMILIES[args.family](args.n)
        spec_vc = estimate_vc_lower_bound(family, q_max=args.q_max, budget=args.budget, seed=seed)
    else:
        spec_vc = known_vc(args.family, args.n)
    return _envelope("vc", args, spec_vc.to_dict(include_witnesses=args.witness), seeds=seeds,
                     provenance={"vc": spec_vc.provenance})


def cmd_report(args: argparse.Namespace) -> ReportEnvelope:
    """종합 검증 실행 (main.comprehensive_validation)"""
    from main import comprehensive_validation

    seed = resolve_seed(args)
    result = comprehensive_validation(output_dir=get_output_dir(args.output_dir), master_seed=seed,
                                      replications=args.replications)
    return _envelope("report", args, result, seeds={"master_seed": seed})


# ====================================================================================================
# 텍스트 출력
# ====================================================================================================

def _flatten(prefix: str, value: Any, lines: List[str]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, lines)
    elif isinstance(value, (list, tuple)) and all(not isinstance(v, (dict, list)) for v in value):
        lines.append(f"{prefix}: [{', '.join(format_number(v) if not isinstance(v, str) else v for v in value)}]")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _flatten(f"{prefix}[{i}]", item, lines)
    elif isinstance(value, str) or value is None:
        lines.append(f"{prefix}: {value if value is not None else '-'}")
    else:
        lines.append(f"{prefix}: {format_number(value)}")


def format_text(envelope: ReportEnvelope) -> str:
    """사람이 읽는 출력 (수치는 유효숫자 9자리, 'table'은 CSV로 출력)"""
    lines = [f"# {envelope.command} (tool {envelope.tool_version})"]
    for key, seed in envelope.seeds.items():
        lines.append(f"seed.{key}: {seed}")
    payload = dict(envelope.payload)
    table = payload.pop("table", None)
    payload.pop("records", None)
    _flatten("", payload, lines)
    for key, value in envelope.provenance.items():
        _flatten(f"provenance.{key}", value, lines)
    if table is not None:
        lines.append(pd.DataFrame(table).to_csv(index=False, float_format="%.9g").rstrip("\n"))
    return "\n".join(lines)
