# ----------------------------------------------------------------------------------------------------
# 작성목적 : 확률적 환경(E) 정의 및 정답(ground truth) 기반 거리 D / 기대위험 R 계산
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 인스턴스 분포, 응답함수 g^T, 잡음 모델, 학습 시퀀스 생성 구현 | 시스템
# 2026-03-09 | 기능 추가 | 복합 가우스-르장드르 적분 및 몬테카를로 적분(표준오차 보고) 추가 | 시스템
# 2026-04-11 | 기능 추가 | 환경 기술자(YAML) 로드 및 내장 환경 라이브러리 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

"""
확률적 환경 E = (T, OM, z, P_z) 의 합성(synthetic) 구현

- 인스턴스 v ~ P_v, 결과 w = g^T(v) + ε (E(ε|v) = 0)
- D(h, g^T) = sqrt(∫ |h(v) - g^T(v)|² P_v(v) dv)
- R(h) = E[(h(v) - w)²] = 잡음 분산 + D²  (위험 항등식)
"""

import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import hermite_e, legendre
from scipy import special

from .exceptions import DimensionMismatchError, DomainError, IntegrationError
from .schemas import EnvironmentSpec, IntegratorConfig
from .utils import load_yaml

logger = logging.getLogger(__name__)

Provenance = Literal["iid_synthetic", "time_series"]


# ====================================================================================================
# 적분 규칙
# ====================================================================================================

@lru_cache(maxsize=32)
def _legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_gauss_legendre(low: float, high: float, n_nodes: int,
                             panel_order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """
    [low, high] 구간의 복합 가우스-르장드르 노드/가중치

    n_nodes를 panel_order 크기의 패널로 나누며, 나누어 떨어지지 않으면
    패널 수를 올림합니다. 가중치 합은 (high - low) 입니다.
    """
    order = min(panel_order, n_nodes)
    panels = max(1, math.ceil(n_nodes / order))
    base_nodes, base_weights = _legendre_rule(order)

    edges = np.linspace(low, high, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * base_nodes[None, :]).reshape(-1)
    weights = (half[:, None] * base_weights[None, :]).reshape(-1)
    return nodes, weights


def as_instance_vector(v: Any, dim: int) -> np.ndarray:
    """인스턴스 벡터 검증 (차원 일치, 모든 좌표 유한)"""
    vector = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1)
    if vector.shape[0] != dim:
        raise DimensionMismatchError(f"인스턴스 차원 불일치: 기대 {dim}, 입력 {vector.shape[0]}")
    if not np.all(np.isfinite(vector)):
        raise DomainError("인스턴스 벡터에 유한하지 않은 좌표가 있습니다")
    return vector


# ====================================================================================================
# 잡음 모델
# ====================================================================================================

@dataclass(frozen=True, eq=False)
class NoiseModel:
    """
    조건부 평균 0 잡음 모델 ε

    kind:
        none              : ε ≡ 0
        uniform_symmetric : ε ~ U[-a, a]
        gaussian          : ε ~ N(0, σ²)
        custom_zero_mean  : 사용자 샘플러 + 선언된 분산/상한 (예: ±a 두 점 분포)
    """
    kind: Literal["none", "uniform_symmetric", "gaussian", "custom_zero_mean"] = "none"
    half_width: Optional[float] = None
    sigma: Optional[float] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    declared_variance: Optional[float] = None
    declared_sup: Optional[float] = None
    atoms: Optional[Tuple[Tuple[float, float], ...]] = None
    label: str = ""

    def __post_init__(self):
        if self.kind == "uniform_symmetric" and not (self.half_width and self.half_width > 0):
            raise DomainError("uniform_symmetric 잡음에는 양수 half_width가 필요합니다")
        if self.kind == "gaussian" and not (self.sigma and self.sigma > 0):
            raise DomainError("gaussian 잡음에는 양수 sigma가 필요합니다")
        if self.kind == "custom_zero_mean" and self.sampler is None:
            raise DomainError("custom_zero_mean 잡음에는 sampler가 필요합니다")
        if self.atoms is not None:
            mean = sum(value * prob for value, prob in self.atoms)
            if abs(mean) > 1e-12 or abs(sum(prob for _, prob in self.atoms) - 1.0) > 1e-12:
                raise DomainError("이산 잡음 원자(atoms)는 평균 0, 확률합 1 이어야 합니다")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """잡음 size개 추출"""
        if self.kind == "none":
            return np.zeros(size)
        if self.kind == "uniform_symmetric":
            return rng.uniform(-self.half_width, self.half_width, size)
        if self.kind == "gaussian":
            return rng.normal(0.0, self.sigma, size)
        return np.asarray(self.sampler(rng, size), dtype=float).reshape(size)

    @property
    def variance(self) -> Optional[float]:
        """E[ε²] (위험 항등식의 h 무관 항). 알 수 없으면 None"""
        if self.kind == "none":
            return 0.0
        if self.kind == "uniform_symmetric":
            return self.half_width ** 2 / 3.0
        if self.kind == "gaussian":
            return self.sigma ** 2
        return self.declared_variance

    @property
    def sup_bound(self) -> Optional[float]:
        """sup |ε| (가우시안은 inf, 미선언 사용자 잡음은 None)"""
        if self.kind == "none":
            return 0.0
        if self.kind == "uniform_symmetric":
            return self.half_width
        if self.kind == "gaussian":
            return math.inf
        return self.declared_sup

    def abs_moment(self, k: float) -> Optional[float]:
        """E|ε|^k"""
        if self.kind == "none":
            return 0.0
        if self.kind == "uniform_symmetric":
            return self.half_width ** k / (k + 1.0)
        if self.kind == "gaussian":
            return self.sigma ** k * 2.0 ** (k / 2.0) * special.gamma((k + 1.0) / 2.0) / math.sqrt(math.pi)
        if self.atoms is not None:
            return sum(abs(value) ** k * prob for value, prob in self.atoms)
        return None

    def quadrature(self, n_nodes: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """ε 분포에 대한 적분 노드/확률가중치. 해석적 규칙이 없으면 None"""
        if self.kind == "none":
            return np.zeros(1), np.ones(1)
        if self.kind == "uniform_symmetric":
            nodes, weights = _legendre_rule(n_nodes)
            return self.half_width * np.asarray(nodes), np.asarray(weights) / 2.0
        if self.kind == "gaussian":
            nodes, weights = hermite_e.hermegauss(n_nodes)
            return self.sigma * nodes, weights / math.sqrt(2.0 * math.pi)
        if self.atoms is not None:
            values = np.array([value for value, _ in self.atoms], dtype=float)
            probs = np.array([prob for _, prob in self.atoms], dtype=float)
            return values, probs
        return None

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "label": self.label or self.kind,
            "half_width": self.half_width,
            "sigma": self.sigma,
            "variance": self.variance,
            "sup_bound": self.sup_bound,
        }


def no_noise() -> NoiseModel:
    return NoiseModel(kind="none", label="none")


def uniform_noise(half_width: float) -> NoiseModel:
    return NoiseModel(kind="uniform_symmetric", half_width=float(half_width),
                      label=f"uniform_symmetric({half_width})")


def gaussian_noise(sigma: float) -> NoiseModel:
    return NoiseModel(kind="gaussian", sigma=float(sigma), label=f"gaussian({sigma})")


def rademacher_noise(half_width: float) -> NoiseModel:
    """±a 두 점 대칭 잡음 (custom_zero_mean 계열의 내장 예)"""
    a = float(half_width)
    if a <= 0:
        raise DomainError("rademacher 잡음 폭은 양수여야 합니다")

    def _sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return a * (2.0 * rng.integers(0, 2, size) - 1.0)

    return NoiseModel(kind="custom_zero_mean", sampler=_sampler, declared_variance=a * a,
                      declared_sup=a, atoms=((-a, 0.5), (a, 0.5)), label=f"rademacher({a})")


# ====================================================================================================
# 인스턴스 분포 P_v
# ====================================================================================================

class InstanceDistribution(ABC):
    """인스턴스 분포 P_v (표본 추출 + 밀도 평가)"""

    dim: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, dim) 배열 반환"""

    @abstractmethod
    def density(self, points: np.ndarray) -> np.ndarray:
        """P_v(v) 평가"""

    @property
    @abstractmethod
    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        """지지집합 상자 (하한, 상한)"""

    def quadrature(self, n_nodes: int, panel_order: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """확률가중치 적분 규칙 (노드 (n, dim), 가중치 합 ≈ 1). 없으면 None"""
        return None

    def total_mass(self, config: IntegratorConfig) -> float:
        """∫ P_v dv"""
        return 1.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        low, high = self.support
        points = np.atleast_2d(points)
        return np.all((points >= low) & (points <= high), axis=1)


class UniformBox(InstanceDistribution):
    """상자 [low, high] 위의 균등분포"""

    def __init__(self, low, high):
        self.low = np.atleast_1d(np.asarray(low, dtype=float))
        self.high = np.atleast_1d(np.asarray(high, dtype=float))
        if self.low.shape != self.high.shape or np.any(self.low >= self.high):
            raise DomainError("균등분포 상자는 low < high 이어야 합니다")
        self.dim = int(self.low.shape[0])
        self.volume = float(np.prod(self.high - self.low))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(size, self.dim))

    def density(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.where(self.contains(points), 1.0 / self.volume, 0.0)

    @property
    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.low, self.high

    def quadrature(self, n_nodes: int, panel_order: int):
        if self.dim != 1:
            return None
        nodes, weights = composite_gauss_legendre(self.low[0], self.high[0], n_nodes, panel_order)
        return nodes[:, None], weights * self.density(nodes[:, None])

    def total_mass(self, config: IntegratorConfig) -> float:
        if self.dim == 1:
            nodes, weights = composite_gauss_legendre(self.low[0], self.high[0], config.n_nodes,
                                                      config.panel_order)
            return float(np.sum(weights * self.density(nodes[:, None])))
        rng = np.random.default_rng(config.mc_seed)
        points = rng.uniform(self.low, self.high, size=(config.mc_samples, self.dim))
        return float(np.mean(self.density(points)) * self.volume)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "uniform_box", "low": self.low.tolist(), "high": self.high.tolist()}


class PointMass(InstanceDistribution):
    """v₀에 집중된 퇴화 분포"""

    def __init__(self, v0):
        self.v0 = np.atleast_1d(np.asarray(v0, dtype=float))
        self.dim = int(self.v0.shape[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.tile(self.v0, (size, 1))

    def density(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.where(np.all(points == self.v0, axis=1), math.inf, 0.0)

    @property
    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.v0, self.v0

    def quadrature(self, n_nodes: int, panel_order: int):
        return self.v0[None, :], np.ones(1)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "point_mass", "v0": self.v0.tolist()}


# ====================================================================================================
# 응답함수, 표본, 학습 시퀀스, 환경
# ====================================================================================================

@dataclass(frozen=True, eq=False)
class ResponseFunction:
    """응답함수 g^T(v) = E(w|v). evaluator는 (n, d) 배열을 받아 (n,) 배열을 반환"""
    evaluator: Callable[[np.ndarray], np.ndarray]
    closed_form: bool = True
    label: str = ""

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.asarray(self.evaluator(points), dtype=float).reshape(-1)
        if values.shape[0] == 1 and points.shape[0] != 1:
            values = np.full(points.shape[0], values[0])
        return values


@dataclass(frozen=True)
class Sample:
    """표본 z = (v, w)"""
    instance: np.ndarray
    outcome: float

    def __post_init__(self):
        if not math.isfinite(self.outcome):
            raise DomainError("결과 w는 유한해야 합니다")


@dataclass(frozen=True, eq=False)
class TrainingSequence:
    """학습 시퀀스 Υ_N (instances: (N, d), outcomes: (N,))"""
    instances: np.ndarray
    outcomes: np.ndarray
    provenance: Provenance = "iid_synthetic"
    operating_mode: str = "default"

    def __post_init__(self):
        instances = np.array(self.instances, dtype=float, ndmin=2)
        outcomes = np.array(self.outcomes, dtype=float).reshape(-1)
        if instances.shape[0] != outcomes.shape[0]:
            if instances.size == 0 and outcomes.size == 0:
                instances = instances.reshape(0, max(1, instances.shape[-1]))
            else:
                raise DimensionMismatchError("인스턴스 수와 결과 수가 다릅니다")
        if not np.all(np.isfinite(instances)) or not np.all(np.isfinite(outcomes)):
            raise DomainError("학습 시퀀스에 유한하지 않은 값이 있습니다")
        instances.setflags(write=False)
        outcomes.setflags(write=False)
        object.__setattr__(self, "instances", instances)
        object.__setattr__(self, "outcomes", outcomes)

    def __len__(self) -> int:
        return int(self.outcomes.shape[0])

    @property
    def size(self) -> int:
        return len(self)

    @property
    def instance_dim(self) -> int:
        return int(self.instances.shape[1])

    @property
    def samples(self) -> List[Sample]:
        return [Sample(instance=v.copy(), outcome=float(w)) for v, w in zip(self.instances, self.outcomes)]

    @classmethod
    def from_samples(cls, samples: List[Sample], instance_dim: int,
                     provenance: Provenance = "iid_synthetic",
                     operating_mode: str = "default") -> "TrainingSequence":
        if not samples:
            return cls(np.empty((0, instance_dim)), np.empty(0), provenance, operating_mode)
        instances = np.vstack([as_instance_vector(s.instance, instance_dim) for s in samples])
        outcomes = np.array([s.outcome for s in samples], dtype=float)
        return cls(instances, outcomes, provenance, operating_mode)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.instances, columns=[f"v{i}" for i in range(self.instance_dim)])
        frame["w"] = self.outcomes
        return frame


@dataclass(frozen=True, eq=False)
class SyntheticEnvironment:
    """
    정답이 알려진 확률적 환경

    생성 후 불변이며 여러 평가자가 동시에 공유할 수 있습니다.
    난수 상태는 항상 호출자가 명시적으로 넘깁니다.
    """
    name: str
    kind: str
    instance_dim: int
    instance_sampler: InstanceDistribution
    response: ResponseFunction
    noise: NoiseModel
    operating_mode: str = "default"
    outcome_range: Optional[Tuple[float, float]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.instance_dim < 1:
            raise DomainError("instance_dim은 1 이상이어야 합니다")
        if self.instance_sampler.dim != self.instance_dim:
            raise DimensionMismatchError("인스턴스 분포 차원이 instance_dim과 다릅니다")

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "instance_dim": self.instance_dim,
            "operating_mode": self.operating_mode,
            "instance_distribution": getattr(self.instance_sampler, "describe", lambda: {})(),
            "noise": self.noise.describe(),
            "outcome_range": list(self.outcome_range) if self.outcome_range else None,
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class IntegrationResult:
    """수치 적분 결과 (value와 오차 추정). squared는 D 계산 시 D²"""
    value: float
    error_estimate: float
    method: str
    n_points: int
    squared: Optional[float] = None


# ====================================================================================================
# 연산
# ====================================================================================================

def sample_instance(env: SyntheticEnvironment, rng: np.random.Generator) -> np.ndarray:
    """P_v로부터 인스턴스 v 하나 추출"""
    return env.instance_sampler.sample(rng, 1)[0]


def _check_outcomes(env: SyntheticEnvironment, outcomes: np.ndarray) -> None:
    if env.outcome_range is None or outcomes.size == 0:
        return
    low, high = env.outcome_range
    if np.any(outcomes < low) or np.any(outcomes > high):
        raise DomainError(f"결과가 선언된 범위 {env.outcome_range}를 벗어났습니다 (환경 선언 확인 필요)")


def draw_outcome(env: SyntheticEnvironment, v: Any, rng: np.random.Generator) -> float:
    """w = g^T(v) + ε"""
    vector = as_instance_vector(v, env.instance_dim)
    outcome = env.response(vector[None, :])[0] + env.noise.sample(rng, 1)[0]
    _check_outcomes(env, np.array([outcome]))
    return float(outcome)


def generate_training_sequence(env: SyntheticEnvironment, n_samples: int,
                               rng: np.random.Generator) -> TrainingSequence:
    """
    i.i.d. 학습 시퀀스 Υ_N 생성

    인스턴스 N개를 먼저 추출한 뒤 잡음 N개를 추출합니다 (고정 시드에서 비트 단위 재현).
    """
    if n_samples < 0:
        raise DomainError(f"N은 0 이상이어야 합니다: {n_samples}")
    if n_samples == 0:
        return TrainingSequence(np.empty((0, env.instance_dim)), np.empty(0),
                                "iid_synthetic", env.operating_mode)
    instances = env.instance_sampler.sample(rng, n_samples)
    outcomes = env.response(instances) + env.noise.sample(rng, n_samples)
    _check_outcomes(env, outcomes)
    return TrainingSequence(instances, outcomes, "iid_synthetic", env.operating_mode)


def _evaluate_rule(rule: Callable, points: np.ndarray, dim: int) -> np.ndarray:
    rule_dim = getattr(rule, "instance_dim", None)
    if rule_dim is not None and rule_dim != dim:
        raise DimensionMismatchError(f"결정규칙 차원 {rule_dim} ≠ 환경 차원 {dim}")
    values = np.asarray(rule(points), dtype=float).reshape(-1)
    if values.shape[0] == 1 and points.shape[0] != 1:
        values = np.full(points.shape[0], values[0])
    return values


def _weighted_mean(values: np.ndarray, weights: np.ndarray, what: str) -> float:
    if not np.all(np.isfinite(values)):
        raise IntegrationError(f"{what} 적분 중 유한하지 않은 값 발생")
    total = float(np.dot(weights, values))
    if not math.isfinite(total):
        raise IntegrationError(f"{what} 적분 결과가 유한하지 않습니다")
    return total


def _squared_gap(env: SyntheticEnvironment, rule: Callable,
                 config: IntegratorConfig) -> Tuple[float, float, str, int]:
    """∫ |h - g^T|² P_v dv 와 오차 추정"""
    dist = env.instance_sampler
    rule_on = dist.quadrature(config.n_nodes, config.panel_order)
    if rule_on is not None:
        nodes, weights = rule_on
        gap = _evaluate_rule(rule, nodes, env.instance_dim) - env.response(nodes)
        value = _weighted_mean(gap ** 2, weights, "D²")
        if nodes.shape[0] == 1:
            return value, 0.0, "point_mass", 1
        coarse_nodes, coarse_weights = dist.quadrature(max(2, config.n_nodes // 2), config.panel_order)
        coarse_gap = _evaluate_rule(rule, coarse_nodes, env.instance_dim) - env.response(coarse_nodes)
        coarse = _weighted_mean(coarse_gap ** 2, coarse_weights, "D²")
        return value, abs(value - coarse), "gauss_legendre", int(nodes.shape[0])

    rng = np.random.default_rng(config.mc_seed)
    points = dist.sample(rng, config.mc_samples)
    squared = (_evaluate_rule(rule, points, env.instance_dim) - env.response(points)) ** 2
    weights = np.full(points.shape[0], 1.0 / points.shape[0])
    value = _weighted_mean(squared, weights, "D²")
    stderr = float(np.std(squared, ddof=1) / math.sqrt(points.shape[0]))
    return value, stderr, "monte_carlo", int(points.shape[0])


def distance_to_response(env: SyntheticEnvironment, rule: Callable,
                         integrator_config: Optional[IntegratorConfig] = None) -> IntegrationResult:
    """
    D(h, g^T) 계산

    Returns:
        IntegrationResult: value=D, squared=D², error_estimate는 D에 대한 오차
        (1차원: 노드 수 절반 규칙과의 차이, 다차원: 몬테카를로 표준오차 전파)
    """
    config = integrator_config or IntegratorConfig()
    squared, error, method, n_points = _squared_gap(env, rule, config)
    distance = math.sqrt(max(squared, 0.0))
    distance_error = error / (2.0 * distance) if distance > 0 else math.sqrt(error)
    return IntegrationResult(value=distance, error_estimate=distance_error, method=method,
                             n_points=n_points, squared=squared)


def noise_term(env: SyntheticEnvironment) -> float:
    """위험 항등식에서 h와 무관한 항 ∫ (w - g^T(v))² P dv dw = E[ε²]"""
    variance = env.noise.variance
    if variance is None:
        raise DomainError(f"잡음 모델 '{env.noise.label}'의 분산이 선언되지 않았습니다")
    return float(variance)


def loss_moment(env: SyntheticEnvironment, rule: Callable, power: float = 1.0,
                integrator_config: Optional[IntegratorConfig] = None) -> IntegrationResult:
    """
    E[l_h(z)^power] = E[|h(v) - w|^(2·power)] 를 (v, ε) 결합 적분으로 계산

    1차원(또는 점질량) 인스턴스 분포와 적분 규칙이 있는 잡음이면 텐서 규칙,
    그 외에는 결합 몬테카를로를 사용합니다.
    """
    config = integrator_config or IntegratorConfig()
    dist = env.instance_sampler
    on_instances = dist.quadrature(config.n_nodes, config.panel_order)
    on_noise = env.noise.quadrature(config.noise_nodes)

    if on_instances is not None and on_noise is not None:
        def _tensor(n_nodes: int) -> Tuple[float, int]:
            nodes, weights = dist.quadrature(n_nodes, config.panel_order)
            gap = _evaluate_rule(rule, nodes, env.instance_dim) - env.response(nodes)
            eps, eps_weights = on_noise
            losses = np.abs(gap[:, None] - eps[None, :]) ** (2.0 * power)
            return _weighted_mean(losses.reshape(-1), np.outer(weights, eps_weights).reshape(-1), "R"), losses.size

        value, n_points = _tensor(config.n_nodes)
        if on_instances[0].shape[0] == 1:
            return IntegrationResult(value, 0.0, "point_mass_tensor", n_points)
        coarse, _ = _tensor(max(2, config.n_nodes // 2))
        return IntegrationResult(value, abs(value - coarse), "gauss_legendre_tensor", n_points)

    rng = np.random.default_rng(config.mc_seed)
    points = dist.sample(rng, config.mc_samples)
    eps = env.noise.sample(rng, config.mc_samples)
    gap = _evaluate_rule(rule, points, env.instance_dim) - env.response(points)
    losses = np.abs(gap - eps) ** (2.0 * power)
    value = _weighted_mean(losses, np.full(losses.shape[0], 1.0 / losses.shape[0]), "R")
    stderr = float(np.std(losses, ddof=1) / math.sqrt(losses.shape[0]))
    return IntegrationResult(value, stderr, "monte_carlo_joint", int(losses.shape[0]))


def expected_risk(env: SyntheticEnvironment, rule: Callable,
                  integrator_config: Optional[IntegratorConfig] = None) -> IntegrationResult:
    """
    기대위험 R(h) = E[l(h(v), w)]

    risk_method='identity' 이고 잡음 분산이 해석적으로 알려져 있으면
    R = 잡음 분산 + D² (위험 항등식), 그 외에는 결합 적분으로 직접 계산합니다.
    """
    config = integrator_config or IntegratorConfig()
    if config.risk_method == "identity" and env.noise.variance is not None:
        squared, error, method, n_points = _squared_gap(env, rule, config)
        return IntegrationResult(value=noise_term(env) + squared, error_estimate=error,
                                 method=f"identity+{method}", n_points=n_points)
    return loss_moment(env, rule, 1.0, config)


def check_density_normalization(env: SyntheticEnvironment,
                                integrator_config: Optional[IntegratorConfig] = None) -> float:
    """∫ P_v dv 를 수치적으로 계산 (1에 가까워야 함)"""
    config = integrator_config or IntegratorConfig()
    mass = env.instance_sampler.total_mass(config)
    if abs(mass - 1.0) > 1e-6:
        logger.warning(f"P_v 적분값이 1과 다릅니다: {mass:.9g} (환경: {env.name})")
    return mass


# ====================================================================================================
# 내장 환경 라이브러리
# ====================================================================================================

def make_affine_environment(slope, intercept: float, low, high, noise: NoiseModel,
                            operating_mode: str = "default",
                            outcome_range: Optional[Tuple[float, float]] = None,
                            name: str = "affine") -> SyntheticEnvironment:
    """g^T(v) = a·v + b, v ~ 균등 상자"""
    slope_vec = np.atleast_1d(np.asarray(slope, dtype=float))
    distribution = UniformBox(low, high)
    if distribution.dim != slope_vec.shape[0]:
        raise DimensionMismatchError("slope 길이와 지지집합 차원이 다릅니다")
    b = float(intercept)

    response = ResponseFunction(lambda points: points @ slope_vec + b, closed_form=True,
                                label=f"affine(a={slope_vec.tolist()}, b={b})")
    return SyntheticEnvironment(name=name, kind="affine", instance_dim=distribution.dim,
                                instance_sampler=distribution, response=response, noise=noise,
                                operating_mode=operating_mode, outcome_range=outcome_range,
                                metadata={"slope": slope_vec.tolist(), "intercept": b})


def make_polynomial_environment(coefficients, low: float, high: float, noise: NoiseModel,
                                operating_mode: str = "default",
                                outcome_range: Optional[Tuple[float, float]] = None,
                                name: str = "polynomial") -> SyntheticEnvironment:
    """g^T(v) = c₀ + c₁v + ... + c_n vⁿ (1차원, 오름차순 계수)"""
    coeffs = np.asarray(coefficients, dtype=float)
    distribution = UniformBox([low], [high])
    response = ResponseFunction(
        lambda points: np.polynomial.polynomial.polyval(points[:, 0], coeffs),
        closed_form=True, label=f"polynomial({coeffs.tolist()})")
    return SyntheticEnvironment(name=name, kind="polynomial", instance_dim=1,
                                instance_sampler=distribution, response=response, noise=noise,
                                operating_mode=operating_mode, outcome_range=outcome_range,
                                metadata={"coefficients": coeffs.tolist()})


def build_noise(spec) -> NoiseModel:
    """NoiseSpec → NoiseModel"""
    if spec.kind == "none":
        return no_noise()
    if spec.kind == "uniform_symmetric":
        return uniform_noise(spec.half_width)
    if spec.kind == "gaussian":
        return gaussian_noise(spec.sigma)
    return rademacher_noise(spec.half_width)


def build_environment(spec: EnvironmentSpec) -> SyntheticEnvironment:
    """환경 기술자로부터 SyntheticEnvironment 생성"""
    noise = build_noise(spec.noise)
    name = spec.name or spec.kind
    low = spec.support.low if spec.support else [0.0] * spec.instance_dim
    high = spec.support.high if spec.support else [1.0] * spec.instance_dim

    if spec.kind == "affine":
        slope = spec.response.get("slope", [1.0] * spec.instance_dim)
        slope = [slope] if np.isscalar(slope) else slope
        if len(slope) != spec.instance_dim:
            raise DimensionMismatchError("response.slope 길이가 instance_dim과 다릅니다")
        return make_affine_environment(slope, spec.response.get("intercept", 0.0), low, high, noise,
                                       spec.operating_mode, spec.outcome_range, name)

    if spec.kind == "polynomial":
        if "coefficients" not in spec.response:
            raise DomainError("polynomial 환경에는 response.coefficients가 필요합니다")
        return make_polynomial_environment(spec.response["coefficients"], low[0], high[0], noise,
                                           spec.operating_mode, spec.outcome_range, name)

    # 활성슬러지 환경은 ode_bridge의 오일러 모델로 구성
    from .ode_bridge import make_activated_sludge_environment
    kwargs = {key: spec.response[key] for key in
              ("mu_max", "half_saturation", "yield_coefficient", "decay", "dt") if key in spec.response}
    support = (low, high) if spec.support else None
    return make_activated_sludge_environment(noise=noise, support=support,
                                             operating_mode=spec.operating_mode, name=name, **kwargs)


def load_environment(path: str) -> Tuple[SyntheticEnvironment, EnvironmentSpec]:
    """환경 기술자 YAML 로드"""
    spec = EnvironmentSpec(**load_yaml(path))
    logger.info(f"환경 기술자 로드: {path} (kind={spec.kind})")
    return build_environment(spec), spec
