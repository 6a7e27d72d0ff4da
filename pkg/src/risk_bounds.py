# ----------------------------------------------------------------------------------------------------
# 작성목적 : 불확실성 모델 계산기 (편차 척도 δ₁/δ₂, ζ, γ(s), 적용성 경계 C, 보장 편차 φ₁/φ₂)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | zeta, gamma, bound_delta1/2, phi1/phi2, 불확실성 모델 보고서 조립 | 시스템
# 2026-03-16 | 기능 추가 | 임의의 적용성 경계 C에 대한 φ 일반형 및 적용성 검사 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

"""
보장 편차(guaranteed deviation) 계산

    ζ    = 4 [q (ln(2N/q) + 1) - ln(η/4)] / N
    γ(s) = ((1/2) ((s-1)/(s-2))^(s-1))^(1/s)
    UM₁ : D(h_emp, g^T)² ≤ φ₁ = R_emp + (Mζ/2)(1 + √(1 + 4R_emp/(Mζ)))
    UM₂ : D(h_emp, g^T)² ≤ φ₂ = R_emp / (1 - γ(s) τ √ζ)₊     (분모 0 → φ = ∞, 무의미)

각 식은 자체 신뢰수준 1-η 에서 성립하며 UM₁/UM₂를 결합(본페로니 분할)하지 않습니다.
"""

import math
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Literal, Optional, Sequence, Union

import numpy as np

from .erm_core import ERMResult
from .exceptions import DomainError, InfiniteVCDimensionError
from .vc_dim import VCSpec

logger = logging.getLogger(__name__)

IID_CONDITIONS = {
    "iid_synthetic": "C.3",
    "time_series": "C'.3",
}


# ====================================================================================================
# 자료형
# ====================================================================================================

@dataclass(frozen=True)
class Confidence:
    """신뢰수준 파라미터 η (성립 확률 ≥ 1-η)"""
    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise DomainError(f"η는 (0, 1) 구간이어야 합니다: {self.eta}")


@dataclass(frozen=True)
class WPI1:
    """약한 사전정보 (1): 손실 상한 M (0 < M < ∞)"""
    m: float
    provenance: str = "user_declared"

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise DomainError(f"M은 유한한 양수여야 합니다: {self.m}")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "WPI1", "M": self.m, "provenance": self.provenance}


@dataclass(frozen=True)
class WPI2:
    """약한 사전정보 (2): (s, τ), 손실 s-노름 대 평균 비율 상한"""
    s: float
    tau: float
    provenance: str = "user_declared"

    def __post_init__(self):
        if not self.s > 2:
            raise DomainError(f"s는 2보다 커야 합니다: {self.s}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"τ는 유한한 양수여야 합니다: {self.tau}")
        if self.tau < 1:
            # 음이 아닌 변수의 s-노름/평균 비는 1 이상
            logger.warning(f"τ={self.tau} < 1: 손실의 s-노름 대 평균 비는 1 이상이어야 합니다")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "WPI2", "s": self.s, "tau": self.tau, "provenance": self.provenance}


WPI = Union[WPI1, WPI2]


@dataclass(frozen=True)
class GuaranteedDeviation:
    """보장 편차 φ와 그 제어 변수 (N, q, η, WPI, R_emp)"""
    model: Literal["UM1", "UM2"]
    value: float
    vacuous: bool
    n_samples: int
    q: float
    vc_provenance: str
    eta: float
    wpi: Dict[str, Any]
    r_emp: float
    zeta: float
    bound_c: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ApplicabilityCheck:
    """sup_h δ[R(h), R_emp(h)] 와 경계 C 비교"""
    measure: Literal["delta1", "delta2"]
    sup_deviation: float
    argmax: int
    bound_c: float
    applicable: bool


@dataclass
class UncertaintyModel:
    """불확실성 모델 보고서: D(h_emp, g^T)² ≤ φ (확률 ≥ 1-η)"""
    model: Literal["UM1", "UM2"]
    deviation: GuaranteedDeviation
    iid_condition: str
    sequence_provenance: str
    erm: Dict[str, Any] = field(default_factory=dict)
    vc: Dict[str, Any] = field(default_factory=dict)

    @property
    def phi(self) -> float:
        return self.deviation.value

    @property
    def vacuous(self) -> bool:
        return self.deviation.vacuous

    @property
    def statement(self) -> str:
        confidence = 1.0 - self.deviation.eta
        if self.vacuous:
            return f"{self.model}: vacuous (φ = inf) at confidence {confidence:.6g}"
        return f"{self.model}: D(h_emp, g^T)^2 <= {self.phi:.9g} with probability >= {confidence:.6g}"

    def to_dict(self) -> Dict[str, Any]:
        wpi_condition = "C.1" if self.model == "UM1" else "C'.1"
        return {
            "model": self.model,
            "statement": self.statement,
            "phi": self.phi,
            "vacuous": self.vacuous,
            "conditions": [wpi_condition, "C.2", self.iid_condition],
            "sequence_provenance": self.sequence_provenance,
            "control_variables": self.deviation.to_dict(),
            "erm": self.erm,
            "vc": self.vc,
        }


# ====================================================================================================
# 기본 계산기
# ====================================================================================================

def _eta_value(eta: Union[float, Confidence]) -> float:
    return eta.eta if isinstance(eta, Confidence) else Confidence(float(eta)).eta


def zeta(n_samples: int, q: float, eta: Union[float, Confidence]) -> float:
    """
    ζ(N, q, η)

    q는 실수 입력도 허용합니다 (합성된 상한이 정수가 아닐 수 있음).
    """
    eta_value = _eta_value(eta)
    if n_samples < 1:
        raise DomainError(f"N은 1 이상이어야 합니다: {n_samples}")
    if math.isinf(q):
        raise InfiniteVCDimensionError()
    if not q >= 1:
        raise DomainError(f"q는 1 이상이어야 합니다: {q}")
    return 4.0 * (q * (math.log(2.0 * n_samples / q) + 1.0) - math.log(eta_value / 4.0)) / n_samples


def gamma(s: float) -> float:
    """γ(s) (s > 2, 로그 공간에서 계산)"""
    if not s > 2:
        raise DomainError(f"s는 2보다 커야 합니다: {s}")
    return math.exp((math.log(0.5) + (s - 1.0) * math.log((s - 1.0) / (s - 2.0))) / s)


def _check_first_argument(a1: float) -> None:
    if not a1 > 0:
        raise DomainError(f"편차 척도의 첫 인자는 양수여야 합니다: {a1}")


def deviation_delta1(a1: float, a2: float) -> float:
    """δ₁[a₁, a₂] = (a₁ - a₂)/√a₁"""
    _check_first_argument(a1)
    return (a1 - a2) / math.sqrt(a1)


def deviation_delta2(a1: float, a2: float) -> float:
    """δ₂[a₁, a₂] = (a₁ - a₂)/a₁"""
    _check_first_argument(a1)
    return (a1 - a2) / a1


def bound_delta1(n_samples: int, q: float, eta: Union[float, Confidence], wpi1: WPI1) -> float:
    """δ₁-적용성 경계 C = √(M ζ)"""
    return math.sqrt(wpi1.m * zeta(n_samples, q, eta))


def bound_delta2(n_samples: int, q: float, eta: Union[float, Confidence], wpi2: WPI2) -> float:
    """δ₂-적용성 경계 C = γ(s) τ √ζ"""
    return gamma(wpi2.s) * wpi2.tau * math.sqrt(zeta(n_samples, q, eta))


def _check_r_emp(r_emp: float) -> None:
    if not (r_emp >= 0 and math.isfinite(r_emp)):
        raise DomainError(f"R_emp는 유한한 0 이상 값이어야 합니다: {r_emp}")


def phi_from_delta1_bound(r_emp: float, bound_c: float) -> float:
    """δ₁-적용성 경계 C에서의 보장 편차: R_emp + (C²/2)(1 + √(1 + 4R_emp/C²))"""
    _check_r_emp(r_emp)
    if bound_c < 0:
        raise DomainError(f"C는 0 이상이어야 합니다: {bound_c}")
    c2 = bound_c * bound_c
    if c2 == 0:
        return r_emp
    return r_emp + 0.5 * c2 * (1.0 + math.sqrt(1.0 + 4.0 * r_emp / c2))


def phi_from_delta2_bound(r_emp: float, bound_c: float) -> float:
    """δ₂-적용성 경계 C에서의 보장 편차: R_emp/(1 - C)₊ (C ≥ 1 이면 inf)"""
    _check_r_emp(r_emp)
    if bound_c < 0:
        raise DomainError(f"C는 0 이상이어야 합니다: {bound_c}")
    denominator = max(1.0 - bound_c, 0.0)
    if denominator == 0.0:
        return math.inf
    return r_emp / denominator


def phi1(r_emp: float, n_samples: int, q: float, eta: Union[float, Confidence], wpi1: WPI1,
         vc_provenance: str = "user_declared") -> GuaranteedDeviation:
    """UM₁ 보장 편차"""
    eta_value = _eta_value(eta)
    z = zeta(n_samples, q, eta_value)
    bound_c = math.sqrt(wpi1.m * z)
    value = phi_from_delta1_bound(r_emp, bound_c)
    return GuaranteedDeviation("UM1", value, False, n_samples, q, vc_provenance, eta_value,
                               wpi1.to_dict(), r_emp, z, bound_c)


def phi2(r_emp: float, n_samples: int, q: float, eta: Union[float, Confidence], wpi2: WPI2,
         vc_provenance: str = "user_declared") -> GuaranteedDeviation:
    """UM₂ 보장 편차 (γ τ √ζ ≥ 1 이면 vacuous, φ = inf)"""
    eta_value = _eta_value(eta)
    z = zeta(n_samples, q, eta_value)
    bound_c = gamma(wpi2.s) * wpi2.tau * math.sqrt(z)
    value = phi_from_delta2_bound(r_emp, bound_c)
    vacuous = math.isinf(value)
    if vacuous:
        logger.debug(f"UM2 무의미: γτ√ζ = {bound_c:.6g} ≥ 1 (N={n_samples}, q={q})")
    return GuaranteedDeviation("UM2", value, vacuous, n_samples, q, vc_provenance, eta_value,
                               wpi2.to_dict(), r_emp, z, bound_c)


def check_applicability(risks: Sequence[float], emp_risks: Sequence[float],
                        measure: Literal["delta1", "delta2"], bound_c: float) -> ApplicabilityCheck:
    """규칙 집합에 대한 sup δ[R(h), R_emp(h)] ≤ C 여부"""
    risks_arr = np.asarray(risks, dtype=float)
    emp_arr = np.asarray(emp_risks, dtype=float)
    if risks_arr.shape != emp_arr.shape or risks_arr.size == 0:
        raise DomainError("risks와 emp_risks는 같은 길이의 비어 있지 않은 배열이어야 합니다")
    deviation = deviation_delta1 if measure == "delta1" else deviation_delta2
    values = np.array([deviation(a1, a2) for a1, a2 in zip(risks_arr, emp_arr)])
    index = int(np.argmax(values))
    return ApplicabilityCheck(measure, float(values[index]), index, bound_c, bool(values[index] <= bound_c))


def build_uncertainty_model(erm: ERMResult, vc: VCSpec, eta: Union[float, Confidence], wpi: WPI,
                            n_samples: Optional[int] = None,
                            sequence_provenance: str = "iid_synthetic") -> UncertaintyModel:
    """
    ERM 결과와 q, η, WPI로 불확실성 모델 보고서 조립

    WPI1 → UM₁, WPI2 → UM₂. q의 출처(provenance)는 그대로 보고서에 기록됩니다.
    """
    n = erm.n_samples if n_samples is None else int(n_samples)
    if n != erm.n_samples:
        raise DomainError(f"N={n}이 ERM에 사용된 학습 시퀀스 길이 {erm.n_samples}와 다릅니다")
    if vc.is_infinite:
        raise InfiniteVCDimensionError(vc.family)
    if sequence_provenance not in IID_CONDITIONS:
        raise DomainError(f"알 수 없는 시퀀스 출처: {sequence_provenance}")

    r_emp = erm.empirical_risk_at_min
    if isinstance(wpi, WPI1):
        deviation = phi1(r_emp, n, vc.value, eta, wpi, vc.provenance)
    else:
        deviation = phi2(r_emp, n, vc.value, eta, wpi, vc.provenance)

    report = UncertaintyModel(model=deviation.model, deviation=deviation,
                              iid_condition=IID_CONDITIONS[sequence_provenance],
                              sequence_provenance=sequence_provenance,
                              erm=erm.to_dict(), vc=vc.to_dict())
    if vc.provenance == "parameter_count_heuristic":
        logger.warning(f"{deviation.model} 보고서의 q는 파라미터 수 휴리스틱입니다 (q={vc.value})")
    return report
