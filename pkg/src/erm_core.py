# ----------------------------------------------------------------------------------------------------
# 작성목적 : 결정규칙 공간 H, 제곱 손실, 경험적 위험 및 경험적 위험 최소화(ERM) 식별 알고리즘
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 선형 공간 정규방정식 해법, 비선형 공간 다중 시작 심플렉스 탐색 구현 | 시스템
# 2026-03-16 | 기능 추가 | 상자 제약 위반 시 lsq_linear 재해석, 과소결정(N < n) 최소노름 해 처리 | 시스템
# 2026-03-23 | 성능 개선 | 재시작을 ThreadPoolExecutor로 병렬화 (인덱스 기준 결정적 병합) | 시스템
# ----------------------------------------------------------------------------------------------------

"""
결정규칙 공간과 ERM

- 손실: l(a, b) = |a - b|²
- 경험적 위험: R_emp(h) = (1/N) Σ l(h(v_i), w_i)
- 식별 목적함수: J(p) = N · R_emp(p)
- 파라미터에 선형인 공간은 정규방정식으로 전역 최소를 정확히 구하고,
  그 외 공간은 시드 고정 다중 시작 Nelder-Mead 탐색의 최선 결과를 사용합니다.
"""

import re
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.optimize import lsq_linear, minimize

from .env_core import Sample, TrainingSequence, as_instance_vector
from .exceptions import DimensionMismatchError, DomainError, EmptySequenceError
from .schemas import OptimizerConfig, RuleSpaceSpec
from .utils import derive_rng, get_max_workers

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]
DesignFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

_PENALTY = 1e300


# ====================================================================================================
# 결정규칙 공간
# ====================================================================================================

@dataclass(frozen=True, eq=False)
class DecisionRuleSpace:
    """
    결정규칙 공간 H = {h_p : p ∈ Γ}

    evaluator(p, V)는 (n, d) 인스턴스 배열에 대해 (n,) 예측값을 반환합니다.
    linear_in_parameters 공간은 design(V) = (offset, Φ) 를 제공하며
    h_p(V) = offset + Φ p 입니다.
    """
    name: str
    param_dim: int
    evaluator: Evaluator
    family_kind: str
    linear_in_parameters: bool = False
    instance_dim: int = 1
    design: Optional[DesignFunction] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    vc_metadata: Dict[str, Any] = field(default_factory=dict)
    info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.param_dim < 1:
            raise DomainError("param_dim은 1 이상이어야 합니다")
        if self.linear_in_parameters and self.design is None:
            raise DomainError(f"선형 공간 '{self.name}'에는 design 함수가 필요합니다")
        if (self.lower is None) != (self.upper is None):
            raise DomainError("lower/upper는 함께 지정해야 합니다")
        if self.lower is not None:
            lower = np.asarray(self.lower, dtype=float).reshape(-1)
            upper = np.asarray(self.upper, dtype=float).reshape(-1)
            if lower.shape[0] != self.param_dim or upper.shape[0] != self.param_dim:
                raise DimensionMismatchError("파라미터 상자 차원이 param_dim과 다릅니다")
            if np.any(lower > upper):
                raise DomainError("파라미터 상자는 lower ≤ upper 이어야 합니다")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)

    @property
    def has_box(self) -> bool:
        return self.lower is not None

    def check_params(self, p: Any) -> np.ndarray:
        params = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1)
        if params.shape[0] != self.param_dim:
            raise DimensionMismatchError(f"파라미터 차원 불일치: 기대 {self.param_dim}, 입력 {params.shape[0]}")
        return params

    def in_box(self, p: np.ndarray, tol: float = 1e-12) -> bool:
        if not self.has_box:
            return True
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def evaluate(self, p: Any, instances: np.ndarray) -> np.ndarray:
        params = self.check_params(p)
        points = np.atleast_2d(np.asarray(instances, dtype=float))
        if points.shape[1] != self.instance_dim:
            raise DimensionMismatchError(f"인스턴스 차원 {points.shape[1]} ≠ 공간 차원 {self.instance_dim}")
        values = np.asarray(self.evaluator(params, points), dtype=float).reshape(-1)
        if values.shape[0] == 1 and points.shape[0] != 1:
            values = np.full(points.shape[0], values[0])
        return values

    def evaluate_many(self, params: np.ndarray, instances: np.ndarray) -> np.ndarray:
        """여러 파라미터 (b, n) 에 대해 (b, m) 예측 행렬"""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        points = np.atleast_2d(np.asarray(instances, dtype=float))
        if self.design is not None:
            offset, phi = self.design(points)
            return offset[None, :] + params @ phi.T
        return np.vstack([self.evaluate(p, points) for p in params])

    def rule(self, p: Any) -> "DecisionRule":
        return DecisionRule(space=self, params=self.check_params(p))

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "family_kind": self.family_kind,
            "param_dim": self.param_dim,
            "instance_dim": self.instance_dim,
            "linear_in_parameters": self.linear_in_parameters,
            "lower": None if self.lower is None else self.lower.tolist(),
            "upper": None if self.upper is None else self.upper.tolist(),
            "info": self.info,
        }


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """공간 H의 고정된 원소 h_p"""
    space: DecisionRuleSpace
    params: np.ndarray

    def __post_init__(self):
        params = np.array(self.params, dtype=float).reshape(-1)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @property
    def instance_dim(self) -> int:
        return self.space.instance_dim

    def __call__(self, instances: np.ndarray) -> np.ndarray:
        return self.space.evaluate(self.params, instances)


def _box_arrays(lower: Optional[Sequence[float]], upper: Optional[Sequence[float]]):
    if lower is None:
        return None, None
    return np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)


def affine_space(dim: int = 1, lower=None, upper=None) -> DecisionRuleSpace:
    """h_p(v) = a·v + b,  p = (a_1, ..., a_d, b)"""

    def _design(points: np.ndarray):
        return np.zeros(points.shape[0]), np.hstack([points, np.ones((points.shape[0], 1))])

    def _evaluate(p: np.ndarray, points: np.ndarray) -> np.ndarray:
        return points @ p[:-1] + p[-1]

    low, high = _box_arrays(lower, upper)
    return DecisionRuleSpace(name=f"affine_{dim}d", param_dim=dim + 1, evaluator=_evaluate,
                             family_kind="affine", linear_in_parameters=True, instance_dim=dim,
                             design=_design, lower=low, upper=high,
                             vc_metadata={"family": "affine", "n": dim})


_BASIS_PATTERN = re.compile(r"^(?:(?P<one>1)|(?P<fn>sin|cos|exp)\(v(?P<fidx>\d*)\)|v(?P<idx>\d*)(?:\^(?P<pow>\d+))?)$")


def _basis_function(name: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """기저 이름('1', 'v', 'v^2', 'v1', 'sin(v)' 등) → 함수"""
    match = _BASIS_PATTERN.match(name.replace(" ", ""))
    if match is None:
        raise DomainError(f"알 수 없는 기저 함수: {name}")
    if match.group("one"):
        return lambda points: np.ones(points.shape[0])

    index_text = match.group("fidx") if match.group("fn") else match.group("idx")
    index = int(index_text) if index_text else 0
    if index >= dim:
        raise DimensionMismatchError(f"기저 '{name}'의 좌표 {index}가 인스턴스 차원 {dim}을 벗어남")
    if match.group("fn"):
        fn = getattr(np, match.group("fn"))
        return lambda points: fn(points[:, index])
    power = int(match.group("pow") or 1)
    return lambda points: points[:, index] ** power


def linear_span_space(basis: Sequence[Union[str, Callable[[np.ndarray], np.ndarray]]], dim: int = 1,
                      lower=None, upper=None) -> DecisionRuleSpace:
    """h_p(v) = Σ p_j φ_j(v) (기저는 이름 또는 (n, d) → (n,) 함수)"""
    functions = [_basis_function(b, dim) if isinstance(b, str) else b for b in basis]
    labels = [b if isinstance(b, str) else getattr(b, "__name__", "custom") for b in basis]
    if not functions:
        raise DomainError("linear_span 기저가 비어 있습니다")

    def _design(points: np.ndarray):
        phi = np.column_stack([np.asarray(fn(points), dtype=float).reshape(-1) for fn in functions])
        return np.zeros(points.shape[0]), phi

    def _evaluate(p: np.ndarray, points: np.ndarray) -> np.ndarray:
        return _design(points)[1] @ p

    low, high = _box_arrays(lower, upper)
    return DecisionRuleSpace(name=f"linear_span({', '.join(labels)})", param_dim=len(functions),
                             evaluator=_evaluate, family_kind="linear_span", linear_in_parameters=True,
                             instance_dim=dim, design=_design, lower=low, upper=high,
                             vc_metadata={"family": "linear_span", "n": len(functions)},
                             info={"basis": labels})


def polynomial_space(degree: int, lower=None, upper=None) -> DecisionRuleSpace:
    """h_p(v) = p_0 + p_1 v + ... + p_n vⁿ (1차원)"""
    if degree < 0:
        raise DomainError("degree는 0 이상이어야 합니다")

    def _design(points: np.ndarray):
        return np.zeros(points.shape[0]), np.vander(points[:, 0], degree + 1, increasing=True)

    def _evaluate(p: np.ndarray, points: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(points[:, 0], p)

    low, high = _box_arrays(lower, upper)
    return DecisionRuleSpace(name=f"polynomial_deg{degree}", param_dim=degree + 1, evaluator=_evaluate,
                             family_kind="polynomial", linear_in_parameters=True, instance_dim=1,
                             design=_design, lower=low, upper=high,
                             vc_metadata={"family": "polynomial", "n": degree},
                             info={"degree": degree})


def perceptron_space(dim: int, lower=None, upper=None) -> DecisionRuleSpace:
    """h(x) = 1 if Σ w_i x_i ≥ θ else 0,  p = (w_1, ..., w_n, θ)"""

    def _evaluate(p: np.ndarray, points: np.ndarray) -> np.ndarray:
        return (points @ p[:-1] >= p[-1]).astype(float)

    low, high = _box_arrays(lower, upper)
    return DecisionRuleSpace(name=f"perceptron_{dim}", param_dim=dim + 1, evaluator=_evaluate,
                             family_kind="perceptron", linear_in_parameters=False, instance_dim=dim,
                             lower=low, upper=high, vc_metadata={"family": "perceptron", "n": dim})


def sine_space(lower=None, upper=None) -> DecisionRuleSpace:
    """h_p(v) = p_1 sin(p_2 v)"""

    def _evaluate(p: np.ndarray, points: np.ndarray) -> np.ndarray:
        return p[0] * np.sin(p[1] * points[:, 0])

    low, high = _box_arrays(lower, upper)
    return DecisionRuleSpace(name="sine", param_dim=2, evaluator=_evaluate, family_kind="sine",
                             linear_in_parameters=False, instance_dim=1, lower=low, upper=high,
                             vc_metadata={"family": "sine"})


def custom_space(name: str, param_dim: int, evaluator: Evaluator, instance_dim: int = 1,
                 lower=None, upper=None, vc_metadata: Optional[Dict[str, Any]] = None) -> DecisionRuleSpace:
    low, high = _box_arrays(lower, upper)
    return DecisionRuleSpace(name=name, param_dim=param_dim, evaluator=evaluator, family_kind="custom",
                             instance_dim=instance_dim, lower=low, upper=high,
                             vc_metadata=vc_metadata or {"family": "custom"})


def build_rule_space(spec: RuleSpaceSpec, instance_dim: int = 1) -> DecisionRuleSpace:
    """RuleSpaceSpec → DecisionRuleSpace"""
    if spec.kind == "affine":
        return affine_space(instance_dim, spec.lower, spec.upper)
    if spec.kind == "polynomial":
        return polynomial_space(spec.degree, spec.lower, spec.upper)
    if spec.kind == "linear_span":
        return linear_span_space(spec.basis, instance_dim, spec.lower, spec.upper)
    if spec.kind == "sine":
        return sine_space(spec.lower, spec.upper)
    if spec.kind == "perceptron":
        return perceptron_space(instance_dim, spec.lower, spec.upper)

    from .ode_bridge import make_model, wrap_as_rule_space
    model = make_model(spec.model, dt=spec.dt)
    space = wrap_as_rule_space(model, spec.lower, spec.upper)
    if space.instance_dim != instance_dim:
        raise DimensionMismatchError(f"ODE 모델 인스턴스 차원 {space.instance_dim} ≠ 환경 차원 {instance_dim}")
    return space


# ====================================================================================================
# 손실과 경험적 위험
# ====================================================================================================

def loss(a, b):
    """제곱 손실 l(a, b) = |a - b|²"""
    value = np.square(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return float(value) if value.ndim == 0 else value


def _rule_values(rule: Callable, instances: np.ndarray) -> np.ndarray:
    values = np.asarray(rule(instances), dtype=float).reshape(-1)
    if values.shape[0] == 1 and instances.shape[0] != 1:
        values = np.full(instances.shape[0], values[0])
    return values


def _check_rule_dim(rule: Callable, dim: int) -> None:
    rule_dim = getattr(rule, "instance_dim", None)
    if rule_dim is not None and rule_dim != dim:
        raise DimensionMismatchError(f"결정규칙 차원 {rule_dim} ≠ 인스턴스 차원 {dim}")


def loss_on_sample(rule: Callable, z: Sample) -> float:
    """l_h(z) = l(h(v), w)"""
    dim = getattr(rule, "instance_dim", np.atleast_1d(z.instance).shape[0])
    vector = as_instance_vector(z.instance, dim)
    return loss(_rule_values(rule, vector[None, :])[0], z.outcome)


def empirical_risk(rule: Callable, seq: TrainingSequence) -> float:
    """R_emp(h) = (1/N) Σ l_h(z_i)"""
    if len(seq) == 0:
        raise EmptySequenceError("빈 학습 시퀀스로 경험적 위험을 계산할 수 없습니다")
    _check_rule_dim(rule, seq.instance_dim)
    residual = _rule_values(rule, seq.instances) - seq.outcomes
    return float(np.mean(residual * residual))


def objective_j(space: DecisionRuleSpace, p: Any, seq: TrainingSequence) -> float:
    """식별 목적함수 J(p) = Σ |w_k - H(v_k, p)|² = N · R_emp(p)"""
    if len(seq) == 0:
        raise EmptySequenceError("빈 학습 시퀀스")
    residual = space.evaluate(p, seq.instances) - seq.outcomes
    return float(np.dot(residual, residual))


def predict(space: DecisionRuleSpace, p: Any, v: Any) -> float:
    """h_p(v)"""
    vector = as_instance_vector(v, space.instance_dim)
    return float(space.evaluate(p, vector[None, :])[0])


# ====================================================================================================
# ERM
# ====================================================================================================

@dataclass(frozen=True, eq=False)
class ERMResult:
    """
    경험적 위험 최소화 결과 h_emp

    empirical_risk_at_min은 최종 파라미터에서 다시 계산한 값입니다.
    flags: underdetermined, ridge_fallback, box_active, budget_exhausted, on_boundary
    """
    p_emp: np.ndarray
    empirical_risk_at_min: float
    n_samples: int
    method: str
    restarts: int = 1
    iterations: int = 0
    converged: bool = True
    flags: Tuple[str, ...] = ()
    candidate_risks: Tuple[float, ...] = ()
    condition_number: Optional[float] = None
    space: Optional[DecisionRuleSpace] = field(default=None, repr=False)

    @property
    def rule(self) -> DecisionRule:
        return self.space.rule(self.p_emp)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_emp": self.p_emp.tolist(),
            "empirical_risk_at_min": self.empirical_risk_at_min,
            "n_samples": self.n_samples,
            "method": self.method,
            "restarts": self.restarts,
            "iterations": self.iterations,
            "converged": self.converged,
            "flags": list(self.flags),
            "condition_number": self.condition_number,
            "space": self.space.name if self.space else None,
        }


def _ridge_solve(gram: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    scale = max(1.0, float(np.trace(gram)) / gram.shape[0])
    return scipy.linalg.solve(gram + ridge * scale * np.eye(gram.shape[0]), rhs, assume_a="sym")


def _solve_linear(space: DecisionRuleSpace, seq: TrainingSequence,
                  config: OptimizerConfig) -> Tuple[np.ndarray, str, List[str], Optional[float]]:
    offset, phi = space.design(seq.instances)
    target = seq.outcomes - offset
    n_samples, k = phi.shape
    flags: List[str] = []
    condition = None

    if n_samples < k:
        p, *_ = scipy.linalg.lstsq(phi, target)
        flags.append("underdetermined")
        method = "min_norm_lstsq"
        logger.debug(f"과소결정 시스템 (N={n_samples} < n={k}): 최소노름 해 사용")
    else:
        gram = phi.T @ phi
        rhs = phi.T @ target
        condition = float(np.linalg.cond(gram))
        method = "normal_equations"
        if not math.isfinite(condition) or condition > config.condition_limit:
            p = _ridge_solve(gram, rhs, config.ridge)
            flags.append("ridge_fallback")
            method = "ridge"
            logger.warning(f"정규방정식이 특이(조건수 {condition:.3g}): ridge 대체 해 사용 ({space.name})")
        else:
            try:
                p = scipy.linalg.solve(gram, rhs, assume_a="pos")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                p = _ridge_solve(gram, rhs, config.ridge)
                flags.append("ridge_fallback")
                method = "ridge"
                logger.warning(f"콜레스키 분해 실패: ridge 대체 해 사용 ({space.name})")

    if space.has_box and not space.in_box(p):
        bounded = lsq_linear(phi, target, bounds=(space.lower, space.upper), method="bvls",
                             tol=1e-12, max_iter=max(100, config.max_iter))
        p = bounded.x
        flags.append("box_active")
        method = "bounded_lsq"
    return np.asarray(p, dtype=float), method, flags, condition


def _start_point(space: DecisionRuleSpace, index: int, seed: int) -> np.ndarray:
    """재시작 시작점: 0번은 상자 중심(또는 원점), 이후는 재시작별 독립 난수 스트림"""
    if index == 0:
        if space.has_box:
            return 0.5 * (space.lower + space.upper)
        return np.zeros(space.param_dim)
    rng = derive_rng(seed, index)
    if space.has_box:
        return rng.uniform(space.lower, space.upper)
    return rng.standard_normal(space.param_dim)


def _run_restart(space: DecisionRuleSpace, seq: TrainingSequence, config: OptimizerConfig,
                 index: int) -> Dict[str, Any]:
    x0 = _start_point(space, index, config.seed)

    def _objective(p: np.ndarray) -> float:
        residual = space.evaluator(p, seq.instances) - seq.outcomes
        value = float(np.mean(residual * residual))
        return value if math.isfinite(value) else _PENALTY

    bounds = list(zip(space.lower, space.upper)) if space.has_box else None
    result = minimize(_objective, x0, method="Nelder-Mead", bounds=bounds,
                      options={"maxiter": config.max_iter, "xatol": config.xatol, "fatol": config.fatol})
    return {
        "index": index,
        "start": x0,
        "start_risk": _objective(x0),
        "x": np.asarray(result.x, dtype=float),
        "risk": float(result.fun),
        "iterations": int(result.nit),
        "converged": bool(result.success),
    }


def _selection_key(risk: float, p: np.ndarray) -> Tuple:
    return (risk, float(np.linalg.norm(p)), tuple(p.tolist()))


def _multistart_search(space: DecisionRuleSpace, seq: TrainingSequence,
                       config: OptimizerConfig) -> Tuple[np.ndarray, Dict[str, Any]]:
    workers = min(get_max_workers(config.workers), config.restarts)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        runs = list(executor.map(lambda i: _run_restart(space, seq, config, i), range(config.restarts)))

    # 시작점도 후보에 포함: 결과 위험 ≤ 시도한 모든 점의 위험
    candidates = []
    for run in runs:
        candidates.append((_selection_key(run["risk"], run["x"]), run["x"], run))
        candidates.append((_selection_key(run["start_risk"], run["start"]), run["start"], run))
    candidates.sort(key=lambda item: item[0])
    _, best_p, best_run = candidates[0]

    diagnostics = {
        "iterations": sum(run["iterations"] for run in runs),
        "converged": best_run["converged"],
        "candidate_risks": tuple(run["risk"] for run in runs),
    }
    return best_p, diagnostics


def minimize_empirical_risk(space: DecisionRuleSpace, seq: TrainingSequence,
                            opt_config: Optional[OptimizerConfig] = None) -> ERMResult:
    """
    h_emp = argmin_{h ∈ H} R_emp(h)

    선형 공간: 정규방정식 (특이 시 ridge 대체, 상자 위반 시 lsq_linear)
    비선형 공간: 다중 시작 Nelder-Mead (재시작 i의 난수 스트림은 (seed, i)에서 파생)
    동률 위험은 파라미터 노름, 그다음 사전식 순서로 결정합니다.
    """
    config = opt_config or OptimizerConfig()
    if len(seq) == 0:
        raise EmptySequenceError("빈 학습 시퀀스로 ERM을 수행할 수 없습니다")
    if seq.instance_dim != space.instance_dim:
        raise DimensionMismatchError(f"학습 시퀀스 차원 {seq.instance_dim} ≠ 공간 차원 {space.instance_dim}")

    if space.linear_in_parameters:
        p, method, flags, condition = _solve_linear(space, seq, config)
        restarts, iterations, converged, candidate_risks = 1, 0, True, ()
    else:
        p, diagnostics = _multistart_search(space, seq, config)
        method, condition, restarts = "nelder_mead_multistart", None, config.restarts
        iterations = diagnostics["iterations"]
        converged = diagnostics["converged"]
        candidate_risks = diagnostics["candidate_risks"]
        flags = [] if converged else ["budget_exhausted"]
        if not converged:
            logger.debug(f"최적화 예산 소진: 최선 후보를 반환합니다 ({space.name})")

    if space.has_box:
        scale = np.maximum(1.0, np.abs(space.upper - space.lower))
        touching = (np.abs(p - space.lower) <= 1e-9 * scale) | (np.abs(p - space.upper) <= 1e-9 * scale)
        if np.any(touching) and "box_active" not in flags:
            flags.append("on_boundary")

    risk = empirical_risk(space.rule(p), seq)
    return ERMResult(p_emp=p, empirical_risk_at_min=risk, n_samples=len(seq), method=method,
                     restarts=restarts, iterations=iterations, converged=converged, flags=tuple(flags),
                     candidate_risks=candidate_risks, condition_number=condition, space=space)
