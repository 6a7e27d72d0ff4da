# ----------------------------------------------------------------------------------------------------
# 작성목적 : 자율 ODE 시스템 모델을 학습기계로 변환 (오일러 이산화, 인스턴스 벡터 구성, 식별)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | euler_step, 시계열 → 학습 시퀀스 변환, 규칙 공간 래핑, 식별 구현 | 시스템
# 2026-03-30 | 기능 추가 | 활성슬러지 기질 모델(선형/모노드) 및 미생물 보조 동역학 추가 | 시스템
# 2026-04-11 | 기능 추가 | 시계열 파일 로드/저장 (pandas, 행/열 위치 오류 보고) | 시스템
# 2026-05-11 | 문서 보완 | 활성슬러지 환경이 균등 상자 위 1단계 오일러 사상임을 명시 | 시스템
# ----------------------------------------------------------------------------------------------------

"""
ODE 모델 → 학습기계

dx_{i₀}/dt = f(x, p) 를 고정 Δt 오일러로 적분하면
    x_{i₀}(t_n) = x_{i₀}(t_{n-1}) + Δt · f(x(t_{n-1}), p) = H(v, p)
이고, 인스턴스 v = [x_{i₀}(t_{n-1}), 나머지 상태변수(t_{n-1})] 순서로 구성합니다.
"""

import os
import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .env_core import (InstanceDistribution, NoiseModel, ResponseFunction, SyntheticEnvironment,
                       TrainingSequence, UniformBox, uniform_noise)
from .erm_core import DecisionRuleSpace, ERMResult, minimize_empirical_risk
from .exceptions import (DimensionMismatchError, DivergenceError, DomainError, IntegrationError,
                         MalformedSeriesError, NonUniformSpacingError, SeriesTooShortError)
from .schemas import OptimizerConfig

logger = logging.getLogger(__name__)

SPACING_TOLERANCE = 1e-9

RightHandSide = Callable[[np.ndarray, np.ndarray], np.ndarray]
AuxDynamics = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class AutonomousODEModel:
    """
    자율(시간 비의존) ODE 모델 dx_{i₀}/dt = f(x, p)

    rhs(X, p)는 (n, state_dim) 상태 배열에 대해 (n,) 배열을 반환합니다.
    linear_in_parameters 모델은 features(X) = Φ 를 제공하며 f(X, p) = Φ p 입니다.
    """
    name: str
    state_dim: int
    target_index: int
    rhs: RightHandSide
    param_dim: int
    dt: float
    state_names: Tuple[str, ...] = ()
    linear_in_parameters: bool = False
    features: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"Δt는 양수여야 합니다: {self.dt}")
        if not 0 <= self.target_index < self.state_dim:
            raise DomainError(f"target_index {self.target_index}가 상태 차원 {self.state_dim}을 벗어남")
        if self.linear_in_parameters and self.features is None:
            raise DomainError("선형 모델에는 features 함수가 필요합니다")
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"x{i}" for i in range(self.state_dim)))
        elif len(self.state_names) != self.state_dim:
            raise DimensionMismatchError("state_names 길이가 state_dim과 다릅니다")

    @property
    def instance_order(self) -> Tuple[int, ...]:
        """인스턴스 벡터에 들어가는 상태 인덱스 순서: 목표 변수, 나머지 상태 순"""
        return (self.target_index,) + tuple(i for i in range(self.state_dim) if i != self.target_index)

    def instances_to_states(self, instances: np.ndarray) -> np.ndarray:
        instances = np.atleast_2d(instances)
        states = np.empty_like(instances)
        states[:, list(self.instance_order)] = instances
        return states

    def states_to_instances(self, states: np.ndarray) -> np.ndarray:
        return np.atleast_2d(states)[:, list(self.instance_order)]


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """등간격 시계열 (times: (T,), states: (T, state_dim))"""
    times: np.ndarray
    states: np.ndarray
    state_names: Tuple[str, ...] = ()

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.shape[0] != times.shape[0]:
            raise DimensionMismatchError(f"시간 수 {times.shape[0]} ≠ 상태 수 {states.shape[0]}")
        if times.shape[0] >= 2:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise NonUniformSpacingError("시간은 엄격히 증가해야 합니다")
            if np.any(np.abs(steps - steps[0]) > SPACING_TOLERANCE * abs(steps[0])):
                raise NonUniformSpacingError(
                    f"시계열 간격이 균일하지 않습니다 (상대 허용오차 {SPACING_TOLERANCE})")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"x{i}" for i in range(states.shape[1])))

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def state_dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def dt(self) -> Optional[float]:
        return float(self.times[1] - self.times[0]) if len(self) >= 2 else None

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=list(self.state_names))
        frame.insert(0, "time", self.times)
        return frame


# ====================================================================================================
# 오일러 이산화와 학습 시퀀스
# ====================================================================================================

def _as_state(model: AutonomousODEModel, x) -> np.ndarray:
    state = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if state.shape[0] != model.state_dim:
        raise DimensionMismatchError(f"상태 차원 불일치: 기대 {model.state_dim}, 입력 {state.shape[0]}")
    return state


def euler_step(model: AutonomousODEModel, x_prev, p, dt: Optional[float] = None) -> float:
    """
    x_{i₀}(t_{n-1}) + Δt · f(x(t_{n-1}), p)

    dt를 넘기면 모델의 Δt 대신 사용합니다 (Δt = 0 이면 x_{i₀} 그대로).
    """
    state = _as_state(model, x_prev)
    params = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1)
    if params.shape[0] != model.param_dim:
        raise DimensionMismatchError(f"파라미터 차원 불일치: 기대 {model.param_dim}, 입력 {params.shape[0]}")
    step = model.dt if dt is None else float(dt)
    if step < 0:
        raise DomainError(f"Δt는 0 이상이어야 합니다: {step}")
    rate = float(np.asarray(model.rhs(state[None, :], params)).reshape(-1)[0])
    if not math.isfinite(rate):
        raise IntegrationError(f"f(x, p)가 유한하지 않습니다 (모델 {model.name})")
    return float(state[model.target_index] + step * rate)


def build_instance_vector(series: TimeSeries, k: int, target_index: int) -> np.ndarray:
    """v_k = [x_{i₀}(t_{k-1}), 나머지 상태(t_{k-1}) (상태 순서 유지)]"""
    if not 1 <= k < len(series):
        raise DomainError(f"인덱스 k={k}가 범위 [1, {len(series) - 1}]를 벗어났습니다")
    if not 0 <= target_index < series.state_dim:
        raise DomainError(f"target_index {target_index}가 상태 차원을 벗어났습니다")
    previous = series.states[k - 1]
    others = np.delete(previous, target_index)
    return np.concatenate([[previous[target_index]], others])


def series_to_training_sequence(series: TimeSeries, target_index: int,
                                operating_mode: str = "default") -> TrainingSequence:
    """시계열 (길이 T) → 학습 시퀀스 (N = T - 1), provenance = time_series"""
    if len(series) < 2:
        raise SeriesTooShortError(len(series))
    if not 0 <= target_index < series.state_dim:
        raise DomainError(f"target_index {target_index}가 상태 차원을 벗어났습니다")
    previous = series.states[:-1]
    instances = np.column_stack([previous[:, target_index], np.delete(previous, target_index, axis=1)])
    outcomes = series.states[1:, target_index]
    return TrainingSequence(instances, outcomes, "time_series", operating_mode)


def wrap_as_rule_space(model: AutonomousODEModel, lower: Optional[Sequence[float]] = None,
                       upper: Optional[Sequence[float]] = None) -> DecisionRuleSpace:
    """H(v, p) = v[0] + Δt · f(상태(v), p) 를 결정규칙 공간으로 래핑"""
    dt = model.dt

    def _evaluate(p: np.ndarray, instances: np.ndarray) -> np.ndarray:
        return instances[:, 0] + dt * np.asarray(model.rhs(model.instances_to_states(instances), p)).reshape(-1)

    design = None
    if model.linear_in_parameters:
        def design(instances: np.ndarray):
            phi = np.asarray(model.features(model.instances_to_states(instances)), dtype=float)
            return instances[:, 0].copy(), dt * phi.reshape(instances.shape[0], model.param_dim)

    return DecisionRuleSpace(
        name=f"ode_euler({model.name})", param_dim=model.param_dim, evaluator=_evaluate,
        family_kind="ode_euler", linear_in_parameters=model.linear_in_parameters,
        instance_dim=model.state_dim, design=design,
        lower=None if lower is None else np.asarray(lower, dtype=float),
        upper=None if upper is None else np.asarray(upper, dtype=float),
        vc_metadata={"family": "ode_euler", "n": model.param_dim, "linear": model.linear_in_parameters},
        info={"model": model.name, "dt": dt, "state_names": list(model.state_names)})


def identify(model: AutonomousODEModel, series: TimeSeries,
             opt_config: Optional[OptimizerConfig] = None,
             lower: Optional[Sequence[float]] = None,
             upper: Optional[Sequence[float]] = None) -> ERMResult:
    """
    시계열로부터 p 식별: 학습 시퀀스 변환 후 래핑된 공간에서 ERM

    J(p) = N · R_emp(p) 이므로 두 목적함수의 최소점은 같습니다.
    """
    if len(series) < 2:
        raise SeriesTooShortError(len(series))
    if series.state_dim != model.state_dim:
        raise DimensionMismatchError(f"시계열 상태 차원 {series.state_dim} ≠ 모델 상태 차원 {model.state_dim}")
    if abs(series.dt - model.dt) > SPACING_TOLERANCE * model.dt:
        raise NonUniformSpacingError(f"시계열 간격 {series.dt}가 모델 Δt {model.dt}와 다릅니다")

    seq = series_to_training_sequence(series, model.target_index)
    space = wrap_as_rule_space(model, lower, upper)
    result = minimize_empirical_risk(space, seq, opt_config)
    logger.info(f"식별 완료: 모델={model.name}, N={len(seq)}, p_emp={result.p_emp.tolist()}, "
                f"R_emp={result.empirical_risk_at_min:.6g}")
    return result


def simulate(model: AutonomousODEModel, p, x0, steps: int,
             aux_dynamics: Optional[AuxDynamics] = None) -> TimeSeries:
    """
    반복 오일러 적분으로 궤적 생성 (t_k = k · Δt)

    aux_dynamics(x_prev, dt)는 목표 변수를 제외한 상태들의 다음 값을 상태 순서대로 반환합니다.
    지정하지 않으면 나머지 상태는 일정하게 유지됩니다.
    """
    if steps < 0:
        raise DomainError(f"steps는 0 이상이어야 합니다: {steps}")
    state = _as_state(model, x0)
    if not np.all(np.isfinite(state)):
        raise DivergenceError(0, "non-finite initial state")
    params = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1)
    others = [i for i in range(model.state_dim) if i != model.target_index]

    trajectory = np.empty((steps + 1, model.state_dim))
    trajectory[0] = state
    for k in range(1, steps + 1):
        previous = trajectory[k - 1]
        with np.errstate(over="ignore", invalid="ignore"):
            rate = float(np.asarray(model.rhs(previous[None, :], params)).reshape(-1)[0])
            trajectory[k, model.target_index] = previous[model.target_index] + model.dt * rate
            if others:
                if aux_dynamics is None:
                    trajectory[k, others] = previous[others]
                else:
                    trajectory[k, others] = np.asarray(aux_dynamics(previous, model.dt), dtype=float).reshape(-1)
        if not np.all(np.isfinite(trajectory[k])):
            raise DivergenceError(k)
    times = model.dt * np.arange(steps + 1)
    return TimeSeries(times, trajectory, model.state_names)


# ====================================================================================================
# 내장 모델 (활성슬러지 기질 동역학)
# ====================================================================================================

def make_linear_decay_model(dt: float = 0.1) -> AutonomousODEModel:
    """dx/dt = -p · x"""
    return AutonomousODEModel(
        name="linear_decay", state_dim=1, target_index=0,
        rhs=lambda states, p: -p[0] * states[:, 0], param_dim=1, dt=dt, state_names=("x",),
        linear_in_parameters=True, features=lambda states: -states[:, [0]])


def make_linear_substrate_model(dt: float = 0.1) -> AutonomousODEModel:
    """dS/dt = -p · S · X  (상태: 기질 S, 미생물 X)"""
    return AutonomousODEModel(
        name="linear_substrate", state_dim=2, target_index=0,
        rhs=lambda states, p: -p[0] * states[:, 0] * states[:, 1], param_dim=1, dt=dt,
        state_names=("S", "X"), linear_in_parameters=True,
        features=lambda states: -(states[:, 0] * states[:, 1])[:, None])


def make_monod_substrate_model(dt: float = 0.1) -> AutonomousODEModel:
    """dS/dt = -p₀ · S / (p₁ + S) · X  (모노드 동역학, 파라미터에 비선형)"""

    def _rhs(states: np.ndarray, p: np.ndarray) -> np.ndarray:
        substrate, biomass = states[:, 0], states[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return -p[0] * substrate / (p[1] + substrate) * biomass

    return AutonomousODEModel(name="monod", state_dim=2, target_index=0, rhs=_rhs, param_dim=2, dt=dt,
                              state_names=("S", "X"))


_MODEL_FACTORIES = {
    "linear_decay": make_linear_decay_model,
    "linear_substrate": make_linear_substrate_model,
    "monod": make_monod_substrate_model,
}


def make_model(name: str, dt: Optional[float] = None) -> AutonomousODEModel:
    if name not in _MODEL_FACTORIES:
        raise DomainError(f"알 수 없는 ODE 모델: {name} (가능: {sorted(_MODEL_FACTORIES)})")
    factory = _MODEL_FACTORIES[name]
    return factory() if dt is None else factory(dt)


def biomass_dynamics(model: AutonomousODEModel, p, yield_coefficient: float = 0.6,
                     decay: float = 0.05) -> AuxDynamics:
    """
    기질 모델의 미생물 X 오일러 갱신: X + Δt (-Y · dS/dt - k_d X)

    모노드 모델이면 -Y dS/dt = Y μ S/(Ks+S) X 입니다.
    """
    if model.state_dim != 2:
        raise DomainError(f"미생물 보조 동역학은 (S, X) 2상태 모델에만 적용됩니다: {model.name}")
    params = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1)

    def _aux(previous: np.ndarray, dt: float) -> np.ndarray:
        substrate_rate = float(np.asarray(model.rhs(previous[None, :], params)).reshape(-1)[0])
        biomass = previous[1]
        return np.array([biomass + dt * (-yield_coefficient * substrate_rate - decay * biomass)])

    return _aux


def make_activated_sludge_environment(mu_max: float = 0.5, half_saturation: float = 2.0,
                                      yield_coefficient: float = 0.6, decay: float = 0.05,
                                      dt: float = 0.1, noise: Optional[NoiseModel] = None,
                                      support: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                                      operating_mode: str = "default",
                                      name: str = "activated_sludge") -> SyntheticEnvironment:
    """
    활성슬러지 기질 환경: v = (S, X) ~ 균등 상자, g^T(v) = H_monod(v, (μ, Ks))

    인스턴스는 시뮬레이션 궤적을 따라 얻는 상태가 아니라 (S, X) 상자(기본값
    [1, 10] × [1, 3])에서 독립 균등 추출한 상태입니다. 응답은 모노드 기질식의
    1단계 오일러 사상 S + Δt·f(S, X; μ, Ks) 이고, w는 여기에 측정 잡음을 더한 값입니다.
    궤적 기반 (비 i.i.d.) 데이터는 simulate / series_to_training_sequence 경로를 사용합니다.
    """
    model = make_monod_substrate_model(dt)
    true_params = np.array([mu_max, half_saturation], dtype=float)
    low, high = support if support is not None else ([1.0, 1.0], [10.0, 3.0])
    distribution: InstanceDistribution = UniformBox(low, high)

    def _response(instances: np.ndarray) -> np.ndarray:
        return instances[:, 0] + dt * model.rhs(model.instances_to_states(instances), true_params)

    return SyntheticEnvironment(
        name=name, kind="activated_sludge", instance_dim=2, instance_sampler=distribution,
        response=ResponseFunction(_response, closed_form=True, label="monod_euler"),
        noise=noise if noise is not None else uniform_noise(0.05), operating_mode=operating_mode,
        metadata={"model": "monod", "true_params": true_params.tolist(), "dt": dt,
                  "yield_coefficient": yield_coefficient, "decay": decay})


# ====================================================================================================
# 시계열 파일 입출력
# ====================================================================================================

def load_time_series(path: str) -> TimeSeries:
    """
    구분자 텍스트 시계열 로드

    헤더 행 필수, 첫 열은 'time', 나머지 열은 상태변수입니다 (.tsv는 탭, 그 외 쉼표).
    형식 오류는 행(헤더 = 1행)과 열 이름을 포함한 MalformedSeriesError로 보고합니다.
    """
    separator = "\t" if path.endswith(".tsv") else ","
    try:
        frame = pd.read_csv(path, sep=separator, dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise DomainError(f"시계열 파일을 찾을 수 없습니다: {path}")
    except pd.errors.EmptyDataError:
        raise MalformedSeriesError("빈 시계열 파일", line=1)
    except pd.errors.ParserError as e:
        raise MalformedSeriesError(f"시계열 파싱 오류: {e}")

    columns = [str(c).strip() for c in frame.columns]
    if not columns or columns[0] != "time":
        raise MalformedSeriesError("첫 열 이름은 'time' 이어야 합니다", line=1,
                                   column=columns[0] if columns else None)
    if len(columns) < 2:
        raise MalformedSeriesError("상태변수 열이 최소 하나 필요합니다", line=1)

    values = np.empty(frame.shape, dtype=float)
    for j, column in enumerate(frame.columns):
        numeric = pd.to_numeric(frame[column].str.strip(), errors="coerce")
        bad = np.flatnonzero(numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float)))
        if bad.size:
            raise MalformedSeriesError(f"숫자가 아닌 값 '{frame[column].iloc[bad[0]]}'",
                                       line=int(bad[0]) + 2, column=columns[j])
        values[:, j] = numeric.to_numpy(dtype=float)

    series = TimeSeries(values[:, 0], values[:, 1:], tuple(columns[1:]))
    logger.info(f"시계열 로드 완료: {path} (길이 {len(series)}, 상태 {series.state_names})")
    return series


def save_time_series(series: TimeSeries, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    series.to_frame().to_csv(path, index=False, float_format="%.17g",
                             sep="\t" if path.endswith(".tsv") else ",")
    logger.info(f"시계열 저장 완료: {path}")
    return path
