# ----------------------------------------------------------------------------------------------------
# 작성목적 : 불확실성 모델링 프레임워크 종합 검증 (공식 재현, 위험 항등식, 수렴, ODE 식별, VC, 커버리지)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 종합 검증 진입점 작성 (공식 기준값, 연구 실험, 커버리지 실험) | 시스템
# 2026-04-04 | 기능 추가 | ERM 격차 연구, 균등 편차 연구, ODE 왕복 식별 단계 추가 | 시스템
# 2026-04-20 | 기능 추가 | configs/experiments 전체 커버리지 실험 및 CSV 저장 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import glob
import logging
from typing import Any, Dict, List, Optional

import numpy as np

from src.mc_harness import (affine_benchmark, compute_wpi1, load_experiment_config, run_coverage_experiment,
                            run_erm_gap_study, run_pointwise_convergence, run_risk_identity_check,
                            run_uniform_deviation_study, write_coverage_outputs)
from src.ode_bridge import biomass_dynamics, identify, make_model, simulate
from src.risk_bounds import WPI1, WPI2, bound_delta1, bound_delta2, gamma, phi1, phi2, zeta
from src.schemas import OptimizerConfig
from src.utils import derive_rng, save_json
from src.vc_dim import (affine_family, estimate_vc_lower_bound, known_vc, right_ray_family,
                        vc_for_bounds)

logger = logging.getLogger(__name__)

EXPERIMENT_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs", "experiments")

# (이름, 계산값 함수, 기준값, 상대 허용오차)
FORMULA_REFERENCES = [
    ("zeta(1000, 3, 0.05)", lambda: zeta(1000, 3, 0.05), 0.107555588589, 1e-9),
    ("zeta(1e7, 10, 0.05)", lambda: zeta(10_000_000, 10, 0.05), 6.3787441608e-05, 1e-8),
    ("zeta(100, 1, 0.5)", lambda: zeta(100, 1, 0.5), 0.335110356329, 1e-9),
    ("gamma(3)", lambda: gamma(3.0), 1.25992104989, 1e-9),
    ("gamma(4)", lambda: gamma(4.0), 1.13975352848, 1e-9),
    ("gamma(100)", lambda: gamma(100.0), 1.00312424626, 1e-9),
    ("C1(M=1, zeta(1000, 3, 0.05))", lambda: bound_delta1(1000, 3, 0.05, WPI1(1.0)), 0.327956687063, 1e-9),
    ("phi1(R=1, N=1e8, q=3, eta=0.05, M=1)",
     lambda: phi1(1.0, 100_000_000, 3, 0.05, WPI1(1.0)).value, 1.00157, 1e-5),
    ("phi2(R=1, N=1e8, q=3, eta=0.05, s=4, tau=1)",
     lambda: phi2(1.0, 100_000_000, 3, 0.05, WPI2(4.0, 1.0)).value, 1.00179, 1e-5),
]


def check_formulas() -> List[Dict[str, Any]]:
    """기준값 재현 검사"""
    rows = []
    for name, compute, expected, tolerance in FORMULA_REFERENCES:
        value = compute()
        relative = abs(value - expected) / abs(expected)
        rows.append({"name": name, "value": value, "expected": expected,
                     "relative_error": relative, "passed": relative <= tolerance})
        if relative > tolerance:
            logger.warning(f"기준값 불일치: {name} = {value:.12g} (기준 {expected:.12g})")
    # UM2 무의미 사례: s=4, τ=10, N=100, q=5
    vacuous_c = bound_delta2(100, 5, 0.05, WPI2(4.0, 10.0))
    vacuous_phi = phi2(0.5, 100, 5, 0.05, WPI2(4.0, 10.0))
    rows.append({"name": "UM2 vacuous (s=4, tau=10, N=100, q=5)", "value": vacuous_c, "expected": None,
                 "relative_error": None, "passed": vacuous_c >= 1 and vacuous_phi.vacuous})
    return rows


def check_ode_round_trip(master_seed: int) -> Dict[str, Any]:
    """무잡음 오일러 궤적에서 파라미터 복원"""
    decay = make_model("linear_decay", 0.1)
    decay_series = simulate(decay, [0.7], [1.0], 50)
    decay_fit = identify(decay, decay_series, OptimizerConfig(seed=master_seed))

    monod = make_model("monod", 0.1)
    truth = np.array([0.5, 2.0])
    monod_series = simulate(monod, truth, [4.0, 2.0], 60, biomass_dynamics(monod, truth))
    monod_fit = identify(monod, monod_series, OptimizerConfig(seed=master_seed, restarts=24),
                         lower=[0.01, 0.01], upper=[5.0, 20.0])

    return {
        "linear_decay": {"true": [0.7], "p_emp": decay_fit.p_emp.tolist(),
                         "abs_error": float(abs(decay_fit.p_emp[0] - 0.7)),
                         "r_emp": decay_fit.empirical_risk_at_min, "method": decay_fit.method},
        "monod": {"true": truth.tolist(), "p_emp": monod_fit.p_emp.tolist(),
                  "relative_error": (np.abs(monod_fit.p_emp - truth) / truth).tolist(),
                  "r_emp": monod_fit.empirical_risk_at_min, "method": monod_fit.method,
                  "flags": list(monod_fit.flags)},
    }


def check_vc(master_seed: int) -> Dict[str, Any]:
    """분할 탐색 하한과 레지스트리 값 비교"""
    ray = estimate_vc_lower_bound(right_ray_family(), q_max=3, budget=4000, seed=master_seed)
    plane = estimate_vc_lower_bound(affine_family(2), q_max=4, budget=20000, seed=master_seed)
    return {
        "right_ray": {"lower_bound": ray.value, "expected": 1},
        "affine_2d": {"lower_bound": plane.value, "expected": 3},
        "perceptron_3": known_vc("perceptron", 3).to_dict(),
        "sine": known_vc("sine").to_dict(),
    }


def run_shipped_experiments(output_dir: str, master_seed: int,
                            replications: Optional[int] = None) -> Dict[str, Any]:
    """configs/experiments/*.yaml 커버리지 실험"""
    results = {}
    for path in sorted(glob.glob(os.path.join(EXPERIMENT_DIR, "*.yaml"))):
        cfg = load_experiment_config(path)
        updates: Dict[str, Any] = {"master_seed": master_seed}
        if replications is not None:
            updates["replications"] = replications
        cfg = cfg.model_copy(update=updates)
        result = run_coverage_experiment(cfg)
        files = write_coverage_outputs(result, output_dir)
        summary = result.to_dict()
        summary["files"] = files
        results[cfg.name] = summary
    return results


def comprehensive_validation(output_dir: str = "output", master_seed: int = 20260302,
                             replications: Optional[int] = None) -> Dict[str, Any]:
    """종합 검증"""
    csv_dir = os.path.join(output_dir, "csv")
    os.makedirs(csv_dir, exist_ok=True)
    env, space = affine_benchmark()

    try:
        logger.info("1단계: 공식 기준값 재현")
        formulas = check_formulas()

        logger.info("2단계: 위험 분해 항등식 R(h) = σ² + D(h, g^T)²")
        sampled_params = derive_rng(master_seed, 1).uniform(space.lower, space.upper, (8, space.param_dim))
        identity = run_risk_identity_check(env, [space.rule(p) for p in sampled_params])

        logger.info("3단계: 고정 규칙 점별 수렴")
        convergence = run_pointwise_convergence(env, space.rule([1.5, 1.2]), [100, 1000, 10000, 100000],
                                                reps=50, seed=master_seed)
        convergence.to_csv(os.path.join(csv_dir, "pointwise_convergence.csv"), index=False)

        logger.info("4단계: ERM 초과위험 격차")
        erm_gap = run_erm_gap_study(env, space, [50, 200, 1000], reps=20, seed=master_seed)
        erm_gap.to_csv(os.path.join(csv_dir, "erm_gap.csv"), index=False)

        logger.info("5단계: 균등 편차 sup δ₁ ≤ C 확인")
        wpi1 = compute_wpi1(env, space)
        uniform = run_uniform_deviation_study(env, space, 200, reps=20, seed=master_seed, eta=0.1,
                                              wpi1=wpi1, vc=vc_for_bounds(space))
        uniform.to_csv(os.path.join(csv_dir, "uniform_deviation.csv"), index=False)

        logger.info("6단계: ODE 왕복 식별")
        ode = check_ode_round_trip(master_seed)

        logger.info("7단계: VC 차원 점검")
        vc = check_vc(master_seed)

        logger.info("8단계: 배포 실험 설정 커버리지")
        coverage = run_shipped_experiments(output_dir, master_seed, replications)
    except Exception as e:
        logger.error(f"종합 검증 실패: {e}")
        raise

    medians = convergence["median"].tolist()
    comprehensive_result = {
        "formulas": formulas,
        "risk_identity": {"max_residual": identity.max_residual, "spread": identity.spread,
                          "noise_term": identity.noise_term},
        "pointwise_convergence": convergence.to_dict(orient="records"),
        "erm_gap": erm_gap.to_dict(orient="records"),
        "uniform_deviation": {"bound_c": float(uniform["bound_c"].iloc[0]),
                              "max_sup_delta1": float(uniform["sup_delta1"].max()),
                              "within_bound_rate": float(uniform["within_bound"].mean()),
                              "wpi1": wpi1.to_dict()},
        "ode_round_trip": ode,
        "vc": vc,
        "coverage": coverage,
        "summary": {
            "formulas_passed": sum(1 for row in formulas if row["passed"]),
            "formulas_total": len(formulas),
            "risk_identity_max_residual": identity.max_residual,
            "convergence_shrinks": bool(medians[-1] < medians[0]),
            "coverage_met": {name: {model: summary["meets_target"]
                                    for model, summary in result["summaries"].items()}
                             for name, result in coverage.items()},
        },
    }

    save_json(comprehensive_result, os.path.join(output_dir, "json", "validation_result.json"))
    return comprehensive_result


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s | %(levelname)s | %(message)s')
    result = comprehensive_validation(replications=100)

    summary = result["summary"]
    print(f"공식 기준값: {summary['formulas_passed']}/{summary['formulas_total']} 일치")
    print(f"위험 항등식 최대 잔차: {summary['risk_identity_max_residual']:.3e}")
    print(f"점별 수렴 (중앙 편차 감소): {summary['convergence_shrinks']}")
    for name, models in summary["coverage_met"].items():
        for model, met in models.items():
            print(f"커버리지 {name}/{model}: {'충족' if met else ('무의미' if met is None else '미달')}")
