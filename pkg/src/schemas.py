# ----------------------------------------------------------------------------------------------------
# 작성목적 : 설정 파일 및 보고서 Pydantic 스키마 정의
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 환경 기술자, 실험 설정, 보고서 봉투 스키마 정의 | 시스템
# 2026-04-11 | 기능 추가 | 적분기/최적화기 설정을 별도 모델로 분리 | 시스템
# ----------------------------------------------------------------------------------------------------

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class NoiseSpec(BaseModel):
    """잡음 모델 설정 (조건부 평균 0 계열만 허용)"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["none", "uniform_symmetric", "gaussian", "rademacher"] = "none"
    half_width: Optional[float] = Field(default=None, gt=0)
    sigma: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_params(self):
        if self.kind in ("uniform_symmetric", "rademacher") and self.half_width is None:
            raise ValueError(f"{self.kind} 잡음에는 half_width가 필요합니다")
        if self.kind == "gaussian" and self.sigma is None:
            raise ValueError("gaussian 잡음에는 sigma가 필요합니다")
        return self


class SupportSpec(BaseModel):
    """인스턴스 분포 P_v의 지지집합 (균등 상자)"""
    model_config = ConfigDict(extra="forbid")

    low: List[float] = Field(default_factory=lambda: [0.0])
    high: List[float] = Field(default_factory=lambda: [1.0])

    @model_validator(mode="after")
    def _check_box(self):
        if len(self.low) != len(self.high):
            raise ValueError("support.low와 support.high의 길이가 다릅니다")
        if any(lo >= hi for lo, hi in zip(self.low, self.high)):
            raise ValueError("support.low < support.high 이어야 합니다")
        return self


class EnvironmentSpec(BaseModel):
    """
    환경 기술자 (configs/environments/*.yaml)

    문서화된 키: kind, instance_dim, response, noise, support,
    operating_mode, outcome_range, seed
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["affine", "polynomial", "activated_sludge"]
    name: Optional[str] = None
    instance_dim: int = Field(default=1, ge=1)
    response: Dict[str, Any] = Field(default_factory=dict)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    support: Optional[SupportSpec] = None
    operating_mode: str = "default"
    outcome_range: Optional[Tuple[float, float]] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_dims(self):
        if self.kind == "polynomial" and self.instance_dim != 1:
            raise ValueError("polynomial 환경은 1차원 인스턴스만 지원합니다")
        if self.kind == "activated_sludge" and self.instance_dim != 2:
            raise ValueError("activated_sludge 환경의 instance_dim은 2 (기질, 미생물) 입니다")
        if self.support is not None and len(self.support.low) != self.instance_dim:
            raise ValueError("support 차원이 instance_dim과 다릅니다")
        if self.outcome_range is not None and self.outcome_range[0] >= self.outcome_range[1]:
            raise ValueError("outcome_range는 (하한, 상한) 이어야 합니다")
        return self


class RuleSpaceSpec(BaseModel):
    """결정규칙 공간 H 설정"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["affine", "polynomial", "linear_span", "sine", "perceptron", "ode_euler"]
    degree: Optional[int] = Field(default=None, ge=0)
    basis: Optional[List[str]] = None
    model: Optional[Literal["linear_decay", "linear_substrate", "monod"]] = None
    dt: Optional[float] = Field(default=None, gt=0)
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "polynomial" and self.degree is None:
            raise ValueError("polynomial 공간에는 degree가 필요합니다")
        if self.kind == "linear_span" and not self.basis:
            raise ValueError("linear_span 공간에는 basis 목록이 필요합니다")
        if self.kind == "ode_euler" and self.model is None:
            raise ValueError("ode_euler 공간에는 model이 필요합니다")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("lower와 upper는 함께 지정해야 합니다")
        if self.lower is not None and len(self.lower) != len(self.upper):
            raise ValueError("lower와 upper의 길이가 다릅니다")
        return self


class IntegratorConfig(BaseModel):
    """D, R 계산용 적분 설정 (1차원: 복합 가우스-르장드르, 다차원: 몬테카를로)"""
    model_config = ConfigDict(extra="forbid")

    n_nodes: int = Field(default=1024, ge=2)
    panel_order: int = Field(default=16, ge=2, le=128)
    noise_nodes: int = Field(default=32, ge=2)
    mc_samples: int = Field(default=20000, ge=10)
    mc_seed: int = 0
    risk_method: Literal["identity", "joint"] = "identity"


class OptimizerConfig(BaseModel):
    """경험적 위험 최소화 설정"""
    model_config = ConfigDict(extra="forbid")

    restarts: int = Field(default=16, ge=1)
    max_iter: int = Field(default=4000, ge=1)
    xatol: float = Field(default=1e-10, gt=0)
    fatol: float = Field(default=1e-14, gt=0)
    seed: int = 0
    ridge: float = Field(default=1e-10, gt=0)
    condition_limit: float = Field(default=1e13, gt=1)
    workers: Optional[int] = Field(default=None, ge=1)


class WPISpec(BaseModel):
    """약한 사전정보(WPI) 출처: 환경으로부터 해석적으로 계산하거나 사용자가 선언"""
    model_config = ConfigDict(extra="forbid")

    source: Literal["analytic", "declared"] = "analytic"
    m: Optional[float] = Field(default=None, gt=0)
    s: float = Field(default=4.0, gt=2)
    tau: Optional[float] = Field(default=None, gt=0)


class VCPolicySpec(BaseModel):
    """경계 계산에 쓰일 VC 차원 q 결정 정책"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["auto", "registry", "user_declared", "parameter_count"] = "auto"
    value: Optional[float] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_value(self):
        if self.kind == "user_declared" and self.value is None:
            raise ValueError("user_declared 정책에는 value가 필요합니다")
        return self


class ExperimentConfig(BaseModel):
    """
    커버리지 실험 설정 (configs/experiments/*.yaml, 파일당 실험 1개)
    """
    model_config = ConfigDict(extra="forbid")

    name: str
    environment: EnvironmentSpec
    rule_space: RuleSpaceSpec
    n_samples: int = Field(ge=1)
    replications: int = Field(default=500, ge=1)
    eta: float = Field(gt=0, lt=1)
    models: List[Literal["UM1", "UM2"]] = Field(default_factory=lambda: ["UM1", "UM2"])
    wpi: WPISpec = Field(default_factory=WPISpec)
    vc_policy: VCPolicySpec = Field(default_factory=VCPolicySpec)
    master_seed: int = 20260302
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator("models")
    @classmethod
    def _non_empty_models(cls, value):
        if not value:
            raise ValueError("models에는 UM1 또는 UM2가 최소 하나 필요합니다")
        return value


class ReportEnvelope(BaseModel):
    """
    CLI 보고서 봉투

    payload의 모든 수치는 arguments/seeds/provenance에 기록된 입력으로
    재현 가능해야 합니다.
    """
    tool_version: str
    command: str
    arguments: Dict[str, Any] = Field(default_factory=dict)
    seeds: Dict[str, int] = Field(default_factory=dict)
    payload: Dict[str, Any] = Field(default_factory=dict)
    provenance: Dict[str, Any] = Field(default_factory=dict)
