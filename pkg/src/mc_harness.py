# ----------------------------------------------------------------------------------------------------
# 작성목적 : 합성 환경에서 프레임워크 주장을 몬테카를로로 검증 (경계 커버리지, 점별 수렴, 위험 항등식, ERM 격차)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 커버리지 실험 및 반복별 기록(held 플래그) 구현 | 시스템
# 2026-03-23 | 성능 개선 | 반복을 ThreadPoolExecutor로 병렬화, 반복별 파생 시드로 결정성 확보 | 시스템
# 2026-04-04 | 기능 추가 | WPI 정답값 계산(꼭짓점/격자), h₀ 오라클, 균등 편차 연구, 재현(replay) 추가 | 시스템
# 2026-04-20 | 기능 추가 | 커버리지 결과 JSON 요약 + CSV 상세 저장 | 시스템
# 2026-05-11 | 로직 수정 | 선형 공간 τ를 잡음 적률로 해석적으로 계산 (격자는 대체 경로), JSON에서 소요 시간 제외 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import math
import time
import logging
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import lsq_linear, minimize

from .env_core import (SyntheticEnvironment, UniformBox, build_environment, distance_to_response,
                       expected_risk, generate_training_sequence, loss_moment, make_affine_environment,
                       no_noise, noise_term, uniform_noise)
from .erm_core import (DecisionRule, DecisionRuleSpace, affine_space, build_rule_space, empirical_risk,
                       minimize_empirical_risk)
from .exceptions import ConfigError, DomainError, OracleUnavailableError
from .risk_bounds import WPI1, WPI2, Confidence, bound_delta1, deviation_delta1, phi1, phi2
from .schemas import ExperimentConfig, IntegratorConfig, OptimizerConfig
from .utils import derive_rng, derive_seed, get_max_workers, load_yaml, save_json
from .vc_dim import VCSpec, vc_for_bounds

logger = logging.getLogger(__name__)

GRID_MARGIN = 1.01
TAU_MARGIN = 1.05
ORACLE_GRID = 101
_CHUNK = 512


# ====================================================================================================
# 결과 자료형
# ====================================================================================================

@dataclass
class ReplicationRecord:
    """반복 1회 기록 (seed로 완전 재현 가능)"""
    index: int
    seed: int
    r_emp: float
    p_emp: List[float]
    d_squared: float
    integration_error: float
    phi: Dict[str, float] = field(default_factory=dict)
    held: Dict[str, bool] = field(default_factory=dict)
    vacuous: Dict[str, bool] = field(default_factory=dict)
    erm_flags: List[str] = field(default_factory=list)

    def to_row(self) -> Dict[str, Any]:
        row = {
            "index": self.index,
            "seed": self.seed,
            "r_emp": self.r_emp,
            "d_squared": self.d_squared,
            "integration_error": self.integration_error,
            "p_emp": " ".join(repr(float(v)) for v in self.p_emp),
            "erm_flags": "|".join(self.erm_flags),
        }
        for model in self.phi:
            row[f"phi_{model}"] = self.phi[model]
            row[f"held_{model}"] = self.held[model]
            row[f"vacuous_{model}"] = self.vacuous[model]
        return row


@dataclass
class ModelCoverage:
    """불확실성 모델별 커버리지 요약"""
    model: str
    replications: int
    non_vacuous: int
    held: int
    vacuous: int
    coverage: Optional[float]
    standard_error: Optional[float]
    target: float
    lower_tolerance: float
    meets_target: Optional[bool]
    median_slack: Optional[float]


@dataclass
class CoverageResult:
    """커버리지 실험 결과: coverage = held / non_vacuous"""
    name: str
    n_samples: int
    eta: float
    master_seed: int
    records: List[ReplicationRecord]
    summaries: Dict[str, ModelCoverage]
    vc: Dict[str, Any]
    wpi: Dict[str, Dict[str, Any]]
    environment: Dict[str, Any]
    rule_space: Dict[str, Any]
    elapsed_seconds: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([record.to_row() for record in self.records])

    def to_dict(self, include_records: bool = False) -> Dict[str, Any]:
        result = {
            "name": self.name,
            "n_samples": self.n_samples,
            "eta": self.eta,
            "master_seed": self.master_seed,
            "replications": len(self.records),
            "summaries": {model: vars(summary) for model, summary in self.summaries.items()},
            "vc": self.vc,
            "wpi": self.wpi,
            "environment": self.environment,
            "rule_space": self.rule_space,
        }
        if include_records:
            result["records"] = [vars(record) for record in self.records]
        return result


@dataclass(frozen=True)
class OracleRule:
    """기대위험 최소 규칙 h₀ 근사"""
    rule: DecisionRule
    risk: float
    method: str


@dataclass(frozen=True)
class RiskIdentityCheck:
    max_residual: float
    residuals: Tuple[float, ...]
    spread: float
    noise_term: float


@dataclass(frozen=True, eq=False)
class ExperimentContext:
    """설정으로부터 한 번 구성되어 모든 반복이 공유하는 불변 객체들"""
    config: ExperimentConfig
    environment: SyntheticEnvironment
    space: DecisionRuleSpace
    vc: VCSpec
    wpi: Dict[str, Any]


# ====================================================================================================
# 기준 환경
# ====================================================================================================

def affine_benchmark(noise_half_width: float = 0.5, box: float = 5.0,
                     operating_mode: str = "default") -> Tuple[SyntheticEnvironment, DecisionRuleSpace]:
    """g^T(v) = 2v + 1, v ~ U[0, 1], ε ~ U[-a, a], 규칙 공간 h_p(v) = p₀v + p₁ (p ∈ [-box, box]²)"""
    noise = uniform_noise(noise_half_width) if noise_half_width > 0 else no_noise()
    env = make_affine_environment([2.0], 1.0, [0.0], [1.0], noise, operating_mode=operating_mode,
                                  name="affine_benchmark")
    space = affine_space(1, lower=[-box, -box], upper=[box, box])
    return env, space


# ====================================================================================================
# 격자 헬퍼
# ====================================================================================================

def _box_vertices(low: np.ndarray, high: np.ndarray) -> np.ndarray:
    return np.array(list(itertools.product(*zip(low, high))), dtype=float)


def _support_grid(env: SyntheticEnvironment, per_dim: int) -> np.ndarray:
    low, high = env.instance_sampler.support
    if np.all(low == high):
        return low[None, :]
    if env.instance_dim <= 2:
        axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(low, high)]
        return np.stack([axis.reshape(-1) for axis in np.meshgrid(*axes, indexing="ij")], axis=1)
    rng = derive_rng(0, env.instance_dim)
    interior = rng.uniform(low, high, size=(20000, env.instance_dim))
    return np.vstack([_box_vertices(low, high), interior])


def _parameter_grid(space: DecisionRuleSpace, per_dim: int, n_random: int = 2000) -> np.ndarray:
    if not space.has_box:
        raise DomainError(f"규칙 공간 '{space.name}'에 파라미터 상자(lower/upper)가 없습니다")
    if space.param_dim <= 2:
        axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(space.lower, space.upper)]
        return np.stack([axis.reshape(-1) for axis in np.meshgrid(*axes, indexing="ij")], axis=1)
    rng = derive_rng(0, space.param_dim)
    interior = rng.uniform(space.lower, space.upper, size=(n_random, space.param_dim))
    return np.vstack([_box_vertices(space.lower, space.upper), interior])


def _max_abs_gap(env: SyntheticEnvironment, space: DecisionRuleSpace, params: np.ndarray,
                 points: np.ndarray) -> float:
    truth = env.response(points)
    best = 0.0
    for start in range(0, params.shape[0], _CHUNK):
        predictions = space.evaluate_many(params[start:start + _CHUNK], points)
        best = max(best, float(np.max(np.abs(predictions - truth[None, :]))))
    return best


# ====================================================================================================
# WPI 정답값
# ====================================================================================================

def compute_wpi1(env: SyntheticEnvironment, space: DecisionRuleSpace, grid_points: int = 201) -> WPI1:
    """
    M = sup_{p ∈ Γ, v ∈ supp, |ε| ≤ a} (h_p(v) - g^T(v) - ε)² = (sup |h_p - g^T| + a)²

    아핀 환경 × 아핀 공간은 h_p(v) - g^T(v)가 p와 v 각각에 대해 아핀이므로
    꼭짓점에서 정확한 최댓값을 얻습니다 (analytic_vertices). 그 외는 격자
    최댓값에 여유계수를 곱합니다 (dense_grid, 근사).
    """
    sup_noise = env.noise.sup_bound
    if sup_noise is None or math.isinf(sup_noise):
        raise DomainError(f"잡음 '{env.noise.label}'이 유계가 아니어서 WPI(1) 정답값을 계산할 수 없습니다")
    if not space.has_box:
        raise DomainError(f"WPI(1) 계산에는 파라미터 상자가 필요합니다: {space.name}")

    low, high = env.instance_sampler.support
    param_vertices = _box_vertices(space.lower, space.upper)
    if env.kind == "affine" and space.family_kind == "affine":
        gap = _max_abs_gap(env, space, param_vertices, _box_vertices(low, high))
        provenance, margin = "analytic_vertices", 1.0
    else:
        params = param_vertices if space.linear_in_parameters else _parameter_grid(space, 101)
        gap = _max_abs_gap(env, space, params, _support_grid(env, grid_points))
        provenance, margin = "dense_grid", GRID_MARGIN
        logger.warning(f"WPI(1) M을 격자 최댓값으로 근사합니다 (여유계수 {margin})")

    m_value = margin * (gap + sup_noise) ** 2
    if m_value <= 0:
        raise DomainError("손실 상한 M이 0입니다 (규칙 공간이 g^T 한 점으로 퇴화)")
    logger.info(f"WPI(1) 계산: M = {m_value:.9g} ({provenance})")
    return WPI1(m=m_value, provenance=provenance)


def _noise_raw_moment(noise, k: int) -> Optional[float]:
    """E[ε^k] (해석적으로 알 수 없으면 None)"""
    if k == 0:
        return 1.0
    if noise.kind == "none":
        return 0.0
    if noise.kind in ("uniform_symmetric", "gaussian"):
        return 0.0 if k % 2 else float(noise.abs_moment(k))
    if noise.atoms is not None:
        return float(sum(value ** k * prob for value, prob in noise.atoms))
    return None


def _affine_gap_moment(alpha: np.ndarray, beta: np.ndarray, m: int) -> np.ndarray:
    """E[(α + βu)^m], u ~ U[-1, 1]"""
    total = np.zeros_like(alpha)
    for i in range(0, m + 1, 2):
        total = total + math.comb(m, i) * alpha ** (m - i) * beta ** i / (i + 1.0)
    return total


def _affine_loss_ratio(alpha: np.ndarray, beta: np.ndarray, s: int, eps_moments: List[float]) -> np.ndarray:
    """(E[l^s])^{1/s} / E[l], l = (α + βu - ε)², 모멘트 전개로 정확히 계산"""
    first = sum(math.comb(2, j) * (-1) ** j * _affine_gap_moment(alpha, beta, 2 - j) * eps_moments[j]
                for j in range(3))
    higher = sum(math.comb(2 * s, j) * (-1) ** j * _affine_gap_moment(alpha, beta, 2 * s - j) * eps_moments[j]
                 for j in range(2 * s + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(higher, 0.0) ** (1.0 / s) / first
    return np.where(first > 0, ratio, 0.0)


def _analytic_tau(env: SyntheticEnvironment, space: DecisionRuleSpace, s: float) -> Optional[float]:
    """
    아핀 환경 × 아핀 공간 (1차원 균등 P_v, 정수 s, 모멘트가 알려진 잡음)의 τ

    h_p - g^T = α + βu (u ~ U[-1, 1]) 로 쓰면 비율은 (α, β)와 잡음 모멘트만의 함수입니다.
    상자 대신 (α, β) ∈ ℝ² 전체에서 상한을 구하므로 결과는 상자 위 τ 이상입니다.
    잡음 표준편차 단위의 크기 ρ와 방향 θ에 대해 격자 탐색 후 Nelder-Mead로 다듬고,
    ρ → ∞ 극한(잡음 없는 비율)도 포함합니다.
    """
    if not (env.kind == "affine" and space.family_kind == "affine" and env.instance_dim == 1
            and isinstance(env.instance_sampler, UniformBox) and float(s).is_integer()):
        return None
    order = int(s)
    eps_moments = [_noise_raw_moment(env.noise, k) for k in range(2 * order + 1)]
    if any(moment is None for moment in eps_moments):
        return None
    no_eps = [1.0] + [0.0] * (2 * order)
    scale = math.sqrt(eps_moments[2])

    def _ratio(theta, log_rho, moments) -> np.ndarray:
        rho = scale * 10.0 ** np.asarray(log_rho, dtype=float) if scale > 0 else np.ones_like(theta)
        return _affine_loss_ratio(rho * np.cos(theta), rho * np.sin(theta), order, moments)

    thetas = np.linspace(0.0, 2.0 * math.pi, 1441)[:-1]
    # ρ → ∞ 극한: 방향만의 함수
    limit = _ratio(thetas, np.zeros_like(thetas), no_eps)
    best_theta = float(thetas[int(np.argmax(limit))])
    tau = float(limit.max())
    refined = minimize(lambda x: -float(_ratio(np.array([x[0]]), np.zeros(1), no_eps)[0]), [best_theta],
                       method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    tau = max(tau, -float(refined.fun))

    if scale > 0:
        tau = max(tau, float(_affine_loss_ratio(np.zeros(1), np.zeros(1), order, eps_moments)[0]))
        theta_grid, log_grid = np.meshgrid(thetas, np.linspace(-3.0, 3.0, 121), indexing="ij")
        values = _ratio(theta_grid, log_grid, eps_moments)
        index = np.unravel_index(int(np.argmax(values)), values.shape)
        start = [float(theta_grid[index]), float(log_grid[index])]
        refined = minimize(lambda x: -float(_ratio(np.array([x[0]]), np.array([x[1]]), eps_moments)[0]),
                           start, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
        tau = max(tau, float(values.max()), -float(refined.fun))
    return tau


def compute_wpi2(env: SyntheticEnvironment, space: DecisionRuleSpace, s: float = 4.0,
                 per_dim: Optional[int] = None, integrator_config: Optional[IntegratorConfig] = None,
                 margin: float = TAU_MARGIN, method: str = "auto") -> WPI2:
    """
    τ = sup_h (E[l_h^s])^{1/s} / E[l_h]

    method='auto': 아핀 × 아핀 (정수 s, 해석적 잡음 모멘트)은 모멘트 전개로 계산 (analytic_moments).
    그 외 또는 method='grid': 파라미터 격자에서 적분 후 여유계수 적용 (quadrature_grid, 근사).
    격자 방식은 기대 손실이 0인 규칙(잡음 없는 h₀)을 건너뜁니다.
    """
    if method not in ("auto", "grid"):
        raise DomainError(f"알 수 없는 τ 계산 방식: {method}")
    if method == "auto":
        tau = _analytic_tau(env, space, s)
        if tau is not None:
            logger.info(f"WPI(2) 계산: s = {s}, τ = {tau:.9g} (analytic_moments)")
            return WPI2(s=s, tau=tau, provenance="analytic_moments")
        logger.warning(f"WPI(2) τ를 격자 최댓값으로 근사합니다 (여유계수 {margin}): {space.name}")

    config = integrator_config or IntegratorConfig()
    grid = _parameter_grid(space, per_dim or (41 if space.param_dim == 1 else 21), n_random=300)
    best = 0.0
    for p in grid:
        rule = space.rule(p)
        mean_loss = loss_moment(env, rule, 1.0, config).value
        if mean_loss <= 1e-14:
            continue
        ratio = loss_moment(env, rule, s, config).value ** (1.0 / s) / mean_loss
        best = max(best, ratio)
    if best == 0.0:
        raise DomainError("모든 격자 규칙의 기대 손실이 0이어서 τ를 정의할 수 없습니다")
    tau = margin * best
    logger.info(f"WPI(2) 계산: s = {s}, τ = {tau:.9g} (격자 최댓값 {best:.9g} × {margin})")
    return WPI2(s=s, tau=tau, provenance="quadrature_grid")


# ====================================================================================================
# h₀ 오라클
# ====================================================================================================

def _oracle_nodes(env: SyntheticEnvironment, config: IntegratorConfig) -> Tuple[np.ndarray, np.ndarray, str]:
    rule_on = env.instance_sampler.quadrature(config.n_nodes, config.panel_order)
    if rule_on is not None:
        return rule_on[0], rule_on[1], "quadrature"
    rng = np.random.default_rng(config.mc_seed)
    points = env.instance_sampler.sample(rng, config.mc_samples)
    return points, np.full(points.shape[0], 1.0 / points.shape[0]), "monte_carlo"


def optimal_rule(env: SyntheticEnvironment, space: DecisionRuleSpace,
                 integrator_config: Optional[IntegratorConfig] = None) -> OracleRule:
    """
    h₀ = argmin_{h ∈ H} R(h) = argmin D(h, g^T)² 근사

    선형 공간: 적분 노드 위 가중 최소제곱 (상자 제약 시 lsq_linear)
    파라미터 2개 이하 비선형 공간: 2단계 격자 (101점 후 한 칸 주변 재격자, 차원당 약 10⁴ 해상도)
    """
    config = integrator_config or IntegratorConfig()
    nodes, weights, node_kind = _oracle_nodes(env, config)
    truth = env.response(nodes)

    if space.linear_in_parameters:
        offset, phi = space.design(nodes)
        root = np.sqrt(weights)
        a_matrix = phi * root[:, None]
        target = (truth - offset) * root
        if space.has_box:
            p = lsq_linear(a_matrix, target, bounds=(space.lower, space.upper), method="bvls", tol=1e-12).x
        else:
            p = np.linalg.lstsq(a_matrix, target, rcond=None)[0]
        method = f"weighted_lstsq_{node_kind}"
    elif space.param_dim <= 2 and space.has_box:
        def _best_on(grid: np.ndarray) -> np.ndarray:
            scores = np.empty(grid.shape[0])
            for start in range(0, grid.shape[0], _CHUNK):
                predictions = space.evaluate_many(grid[start:start + _CHUNK], nodes)
                scores[start:start + _CHUNK] = ((predictions - truth[None, :]) ** 2) @ weights
            return grid[int(np.nanargmin(scores))]

        coarse = _best_on(_parameter_grid(space, ORACLE_GRID))
        cell = (space.upper - space.lower) / (ORACLE_GRID - 1)
        lo = np.maximum(space.lower, coarse - cell)
        hi = np.minimum(space.upper, coarse + cell)
        axes = [np.linspace(a, b, ORACLE_GRID) for a, b in zip(lo, hi)]
        fine = np.stack([axis.reshape(-1) for axis in np.meshgrid(*axes, indexing="ij")], axis=1)
        p = _best_on(fine)
        method = "dense_grid"
    else:
        raise OracleUnavailableError(
            f"h₀ 오라클을 구성할 수 없습니다: {space.name} (선형 공간 또는 상자가 있는 2차원 이하 공간만 지원)")

    rule = space.rule(p)
    return OracleRule(rule=rule, risk=expected_risk(env, rule, config).value, method=method)


# ====================================================================================================
# 커버리지 실험
# ====================================================================================================

def load_experiment_config(path: str) -> ExperimentConfig:
    """실험 설정 YAML 로드 (파일당 실험 1개)"""
    try:
        return ExperimentConfig(**load_yaml(path))
    except ConfigError:
        raise
    except Exception as e:
        logger.error(f"실험 설정 검증 실패: {path} - {e}")
        raise ConfigError(f"실험 설정 검증 실패: {path} - {e}")


def prepare_experiment(cfg: ExperimentConfig) -> ExperimentContext:
    """환경, 규칙 공간, q, WPI 구성"""
    env = build_environment(cfg.environment)
    space = build_rule_space(cfg.rule_space, env.instance_dim)
    vc = vc_for_bounds(space, cfg.vc_policy)

    wpi: Dict[str, Any] = {}
    if "UM1" in cfg.models:
        if cfg.wpi.source == "declared":
            if cfg.wpi.m is None:
                raise ConfigError("wpi.source=declared 인 UM1 실험에는 wpi.m이 필요합니다")
            wpi["UM1"] = WPI1(cfg.wpi.m, "user_declared")
        else:
            wpi["UM1"] = compute_wpi1(env, space)
    if "UM2" in cfg.models:
        if cfg.wpi.source == "declared":
            if cfg.wpi.tau is None:
                raise ConfigError("wpi.source=declared 인 UM2 실험에는 wpi.tau가 필요합니다")
            wpi["UM2"] = WPI2(cfg.wpi.s, cfg.wpi.tau, "user_declared")
        else:
            wpi["UM2"] = compute_wpi2(env, space, cfg.wpi.s, integrator_config=cfg.integrator)
    return ExperimentContext(cfg, env, space, vc, wpi)


def _run_replication(context: ExperimentContext, index: int) -> ReplicationRecord:
    cfg = context.config
    seed = derive_seed(cfg.master_seed, index)
    rng = np.random.default_rng(seed)
    seq = generate_training_sequence(context.environment, cfg.n_samples, rng)
    optimizer = cfg.optimizer.model_copy(update={"seed": seed, "workers": 1})
    erm = minimize_empirical_risk(context.space, seq, optimizer)
    distance = distance_to_response(context.environment, erm.rule, cfg.integrator)

    record = ReplicationRecord(index=index, seed=seed, r_emp=erm.empirical_risk_at_min,
                               p_emp=erm.p_emp.tolist(), d_squared=distance.squared,
                               integration_error=distance.error_estimate, erm_flags=list(erm.flags))
    for model in cfg.models:
        if model == "UM1":
            deviation = phi1(erm.empirical_risk_at_min, cfg.n_samples, context.vc.value, cfg.eta,
                             context.wpi["UM1"], context.vc.provenance)
        else:
            deviation = phi2(erm.empirical_risk_at_min, cfg.n_samples, context.vc.value, cfg.eta,
                             context.wpi["UM2"], context.vc.provenance)
        record.phi[model] = deviation.value
        record.vacuous[model] = deviation.vacuous
        record.held[model] = bool(distance.squared <= deviation.value)
    logger.debug(f"반복 {index}: seed={seed}, R_emp={record.r_emp:.6g}, D²={record.d_squared:.6g}")
    return record


def _summarize(model: str, records: List[ReplicationRecord], eta: float) -> ModelCoverage:
    finite = [r for r in records if not r.vacuous[model]]
    held = sum(1 for r in finite if r.held[model])
    target = 1.0 - eta
    n = len(finite)
    lower_tolerance = target - 2.0 * math.sqrt(eta * (1.0 - eta) / n) if n else target
    coverage = held / n if n else None
    standard_error = math.sqrt(coverage * (1.0 - coverage) / n) if n else None
    slack = float(np.median([r.phi[model] - r.d_squared for r in finite])) if n else None
    return ModelCoverage(model=model, replications=len(records), non_vacuous=n, held=held,
                         vacuous=len(records) - n, coverage=coverage, standard_error=standard_error,
                         target=target, lower_tolerance=lower_tolerance,
                         meets_target=None if coverage is None else coverage >= lower_tolerance,
                         median_slack=slack)


def run_coverage_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> CoverageResult:
    """
    반복마다 새 Υ_N → ERM → R_emp → φ → 참 D² → held 플래그, 이후 커버리지 집계

    반복 i의 시드는 derive_seed(master_seed, i) 이므로 스케줄링과 무관하게 결정적입니다.
    """
    started = time.time()
    logger.info(f"커버리지 실험 시작: {cfg.name} (N={cfg.n_samples}, 반복={cfg.replications}, η={cfg.eta})")
    try:
        logger.info("1단계: 환경/규칙 공간/q/WPI 구성")
        context = prepare_experiment(cfg)
        logger.info(f"q = {context.vc.value} ({context.vc.provenance})")

        logger.info("2단계: 반복 실행")
        n_workers = min(get_max_workers(workers if workers is not None else cfg.workers), cfg.replications)
        with ThreadPoolExecutor(max_workers=n_workers) as executor:
            records = list(executor.map(lambda i: _run_replication(context, i), range(cfg.replications)))
        records.sort(key=lambda record: record.index)

        logger.info("3단계: 커버리지 집계")
        summaries = {model: _summarize(model, records, cfg.eta) for model in cfg.models}
    except Exception as e:
        logger.error(f"커버리지 실험 실패 ({cfg.name}): {e}")
        raise

    for model, summary in summaries.items():
        if summary.non_vacuous == 0:
            logger.warning(f"{model}: 모든 반복에서 경계가 무의미(vacuous)합니다")
        else:
            logger.info(f"{model}: 커버리지 {summary.held}/{summary.non_vacuous} = {summary.coverage:.4f} "
                        f"(목표 {summary.target:.3f}, 허용 하한 {summary.lower_tolerance:.4f}), "
                        f"중앙 여유 φ-D² = {summary.median_slack:.6g}")

    elapsed = time.time() - started
    logger.info(f"커버리지 실험 소요 시간: {elapsed:.2f}초 ({cfg.name})")
    # 소요 시간은 JSON에 넣지 않음 (같은 시드 재실행 시 바이트 단위 동일)
    return CoverageResult(
        name=cfg.name, n_samples=cfg.n_samples, eta=cfg.eta, master_seed=cfg.master_seed,
        records=records, summaries=summaries, vc=context.vc.to_dict(),
        wpi={model: value.to_dict() for model, value in context.wpi.items()},
        environment=context.environment.describe(), rule_space=context.space.describe(),
        elapsed_seconds=elapsed)


def replay_replication(cfg: ExperimentConfig, index: int,
                       context: Optional[ExperimentContext] = None) -> ReplicationRecord:
    """기록된 시드로 반복 index를 다시 계산"""
    if not 0 <= index < cfg.replications:
        raise DomainError(f"반복 번호 {index}가 범위 [0, {cfg.replications})를 벗어났습니다")
    return _run_replication(context or prepare_experiment(cfg), index)


def write_coverage_outputs(result: CoverageResult, directory: str) -> Dict[str, str]:
    """JSON 요약 (output/json) + 반복별 CSV (output/csv)"""
    json_path = os.path.join(directory, "json", f"{result.name}_coverage.json")
    csv_path = os.path.join(directory, "csv", f"{result.name}_records.csv")
    save_json(result.to_dict(), json_path)
    os.makedirs(os.path.dirname(csv_path), exist_ok=True)
    result.to_frame().to_csv(csv_path, index=False)
    logger.info(f"반복별 기록 저장: {csv_path}")
    return {"json": json_path, "csv": csv_path}


# ====================================================================================================
# 수렴/항등식/격차 연구
# ====================================================================================================

def _quantile_table(rows: List[Dict[str, Any]], key: str, value_column: str) -> pd.DataFrame:
    frame = pd.DataFrame(rows)
    grouped = frame.groupby(key)[value_column]
    table = pd.DataFrame({
        "reps": grouped.size(),
        "median": grouped.median(),
        "q25": grouped.quantile(0.25),
        "q75": grouped.quantile(0.75),
        "max": grouped.max(),
    }).reset_index()
    return table


def run_pointwise_convergence(env: SyntheticEnvironment, rule: Callable, n_grid: Sequence[int],
                              reps: int, seed: int,
                              integrator_config: Optional[IntegratorConfig] = None) -> pd.DataFrame:
    """고정 h에 대해 N별 |R_emp(h) - R(h)| 분포 (중앙값/사분위수)"""
    true_risk = expected_risk(env, rule, integrator_config).value
    rows = []
    for n in n_grid:
        for r in range(reps):
            seq = generate_training_sequence(env, int(n), derive_rng(seed, int(n), r))
            rows.append({"n": int(n), "rep": r, "deviation": abs(empirical_risk(rule, seq) - true_risk)})
    table = _quantile_table(rows, "n", "deviation")
    table["true_risk"] = true_risk
    logger.info(f"점별 수렴 연구 완료: N={list(n_grid)}, 중앙값={table['median'].round(8).tolist()}")
    return table


def run_risk_identity_check(env: SyntheticEnvironment, rules: Sequence[Callable],
                            integrator_config: Optional[IntegratorConfig] = None) -> RiskIdentityCheck:
    """max_h |R(h) - 잡음항 - D(h, g^T)²| (R은 결합 적분으로 직접 계산)"""
    config = integrator_config or IntegratorConfig()
    joint = config.model_copy(update={"risk_method": "joint"})
    sigma2 = noise_term(env)
    residuals = []
    for rule in rules:
        risk = expected_risk(env, rule, joint).value
        squared = distance_to_response(env, rule, config).squared
        residuals.append(abs(risk - sigma2 - squared))
    return RiskIdentityCheck(max_residual=max(residuals), residuals=tuple(residuals),
                             spread=max(residuals) - min(residuals), noise_term=sigma2)


def run_erm_gap_study(env: SyntheticEnvironment, space: DecisionRuleSpace, n_grid: Sequence[int],
                      reps: int, seed: int, integrator_config: Optional[IntegratorConfig] = None,
                      opt_config: Optional[OptimizerConfig] = None) -> pd.DataFrame:
    """N별 초과위험 R(h_emp) - R(h₀) 분포"""
    config = integrator_config or IntegratorConfig()
    oracle = optimal_rule(env, space, config)
    optimizer = opt_config or OptimizerConfig()
    rows = []
    for n in n_grid:
        for r in range(reps):
            seq = generate_training_sequence(env, int(n), derive_rng(seed, int(n), r))
            erm = minimize_empirical_risk(space, seq, optimizer.model_copy(update={"seed": derive_seed(seed, int(n), r)}))
            rows.append({"n": int(n), "rep": r, "gap": expected_risk(env, erm.rule, config).value - oracle.risk})
    table = _quantile_table(rows, "n", "gap")
    table["oracle_risk"] = oracle.risk
    table["oracle_method"] = oracle.method
    logger.info(f"ERM 격차 연구 완료: 오라클={oracle.method}, 중앙값={table['median'].round(8).tolist()}")
    return table


def run_uniform_deviation_study(env: SyntheticEnvironment, space: DecisionRuleSpace, n_samples: int,
                                reps: int, seed: int, eta: float, wpi1: Optional[WPI1] = None,
                                vc: Optional[VCSpec] = None, n_rules: int = 64,
                                integrator_config: Optional[IntegratorConfig] = None) -> pd.DataFrame:
    """
    반복별 sup_h δ₁[R(h), R_emp(h)] (고정 비교 규칙 + 해당 반복의 h_emp) 와 C = √(Mζ) 비교

    비교 규칙은 상자 꼭짓점과 파라미터 상자 균등 추출 n_rules개이며 R(h)는 한 번만 계산합니다.
    """
    config = integrator_config or IntegratorConfig()
    Confidence(eta)
    wpi1 = wpi1 or compute_wpi1(env, space)
    vc = vc or vc_for_bounds(space)
    bound_c = bound_delta1(n_samples, vc.value, eta, wpi1)

    if not space.has_box:
        raise DomainError(f"균등 편차 연구에는 파라미터 상자가 필요합니다: {space.name}")
    fixed_params = np.vstack([
        _box_vertices(space.lower, space.upper),
        derive_rng(seed, 0x5EED).uniform(space.lower, space.upper, (n_rules, space.param_dim)),
    ])
    fixed_rules = [space.rule(p) for p in fixed_params]
    fixed_risks = np.array([expected_risk(env, rule, config).value for rule in fixed_rules])

    rows = []
    for r in range(reps):
        seq = generate_training_sequence(env, n_samples, derive_rng(seed, n_samples, r))
        erm = minimize_empirical_risk(space, seq, OptimizerConfig(seed=derive_seed(seed, r), workers=1))
        deviations = [deviation_delta1(risk, empirical_risk(rule, seq))
                      for rule, risk in zip(fixed_rules, fixed_risks) if risk > 0]
        erm_risk = expected_risk(env, erm.rule, config).value
        if erm_risk > 0:
            deviations.append(deviation_delta1(erm_risk, erm.empirical_risk_at_min))
        sup_deviation = max(deviations) if deviations else 0.0
        rows.append({"rep": r, "sup_delta1": sup_deviation, "bound_c": bound_c,
                     "within_bound": sup_deviation <= bound_c})
    table = pd.DataFrame(rows)
    logger.info(f"균등 편차 연구: N={n_samples}, C={bound_c:.6g}, "
                f"경계 내 비율={table['within_bound'].mean():.4f}")
    return table
