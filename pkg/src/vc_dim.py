# ----------------------------------------------------------------------------------------------------
# 작성목적 : VC 차원 도구 (pos 집합, 분할(shattering) 검사, 하한 탐색, 알려진 함수족 레지스트리)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | pos_set, is_shattered, estimate_vc_lower_bound, known_vc 구현 | 시스템
# 2026-03-23 | 성능 개선 | 파라미터 추출을 배치 단위 ThreadPoolExecutor로 병렬화 (배치 순서 병합) | 시스템
# 2026-04-04 | 기능 추가 | 손실 함수족 l_H (β 이동) 및 경계 계산용 q 결정 정책(vc_for_bounds) 추가 | 시스템
# 2026-05-11 | 로직 수정 | 선형 결합 공간의 레지스트리 손실 q를 2k로 통일 | 시스템
# ----------------------------------------------------------------------------------------------------

"""
VC 차원

- pos(f) = {a ∈ G : f(a) > 0} (엄격 부등호)
- 점집합 I가 분할된다 ⇔ I의 2^|I| 이분(dichotomy)이 모두 어떤 f의 pos(f) ∩ I 로 실현됨
- 무작위/격자 탐색은 분할 불가능을 증명할 수 없으므로 부정 판정은 'not_witnessed' 입니다.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Union

import numpy as np

from .erm_core import DecisionRuleSpace
from .exceptions import (DomainError, InfiniteVCDimensionError, ShatteringLimitError,
                         UnknownFamilyError)
from .schemas import VCPolicySpec
from .utils import derive_rng, get_max_workers

logger = logging.getLogger(__name__)

MAX_SHATTER_POINTS = 12
DEFAULT_BUDGET = 20000
DEFAULT_BATCH = 2048

Provenance = Literal["exact_known", "upper_bound", "lower_bound_found",
                     "parameter_count_heuristic", "user_declared"]


# ====================================================================================================
# 자료형
# ====================================================================================================

@dataclass(frozen=True, eq=False)
class PointSet:
    """서로 다른 점들의 유한 집합 I ⊂ G (points: (m, dim))"""
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[0] > 1 and np.unique(points, axis=0).shape[0] != points.shape[0]:
            raise DomainError("PointSet에 중복 점이 있습니다")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def subset(self, indices: Sequence[int]) -> "PointSet":
        return PointSet(self.points[list(indices)])


@dataclass(frozen=True, eq=False)
class FunctionFamily:
    """
    실수값 함수족 F = {f_params}

    evaluator(P, X): 파라미터 (b, k), 점 (m, dim) → (b, m) 값
    param_sampler(rng, size): (size, k) 파라미터 추출
    grid: 무작위 추출 전에 먼저 시도할 파라미터 격자 (선택)
    """
    name: str
    param_dim: int
    point_dim: int
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    param_sampler: Callable[[np.random.Generator, int], np.ndarray]
    grid: Optional[np.ndarray] = None
    domain_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def evaluate(self, params: np.ndarray, points: np.ndarray) -> np.ndarray:
        params = np.atleast_2d(np.asarray(params, dtype=float))
        points = np.asarray(points, dtype=float).reshape(-1, self.point_dim)
        return np.asarray(self.evaluator(params, points), dtype=float).reshape(params.shape[0], points.shape[0])


@dataclass(frozen=True, eq=False)
class ShiftedLossFamily(FunctionFamily):
    """
    손실 함수족 l_H = {l_{h,β}(z) = l_h(z) - β : h ∈ H, β ≥ 0}

    점은 z = (v, w), 파라미터는 (p, β) 입니다. free_shift=False 이면 β ≡ 0.
    """
    space: Optional[DecisionRuleSpace] = None
    free_shift: bool = True

    def loss_value(self, p, beta: float, z) -> float:
        z = np.asarray(z, dtype=float).reshape(1, -1)
        prediction = self.space.evaluate(p, z[:, :-1])[0]
        return float((prediction - z[0, -1]) ** 2 - beta)


@dataclass
class ShatterVerdict:
    """
    분할 검사 결과

    witnesses: 이분 마스크(정수 인코딩, 비트 i = 점 i 포함) → 재검증된 파라미터
    """
    verdict: Literal["shattered", "not_witnessed"]
    point_set: PointSet
    witnesses: Dict[int, np.ndarray] = field(default_factory=dict)
    draws: int = 0

    @property
    def shattered(self) -> bool:
        return self.verdict == "shattered"

    @property
    def missing(self) -> List[int]:
        return [mask for mask in range(2 ** len(self.point_set)) if mask not in self.witnesses]

    def subset_verdict(self, indices: Sequence[int]) -> "ShatterVerdict":
        """보관된 증인만으로 부분집합의 분할 여부 판정 (단조성)"""
        indices = list(indices)
        restricted: Dict[int, np.ndarray] = {}
        for mask in sorted(self.witnesses):
            sub_mask = sum(1 << j for j, i in enumerate(indices) if mask >> i & 1)
            restricted.setdefault(sub_mask, self.witnesses[mask])
        verdict = "shattered" if len(restricted) == 2 ** len(indices) else "not_witnessed"
        return ShatterVerdict(verdict, self.point_set.subset(indices), restricted, 0)

    def to_dict(self, include_witnesses: bool = False) -> Dict[str, Any]:
        result = {
            "verdict": self.verdict,
            "points": self.point_set.points.tolist(),
            "dichotomies_total": 2 ** len(self.point_set),
            "dichotomies_witnessed": len(self.witnesses),
            "draws": self.draws,
        }
        if include_witnesses:
            result["witnesses"] = {format(mask, f"0{len(self.point_set)}b")[::-1]: p.tolist()
                                   for mask, p in sorted(self.witnesses.items())}
        return result


@dataclass(frozen=True)
class VCSpec:
    """VC 차원 값(정수 또는 무한)과 출처"""
    value: Union[int, float]
    provenance: Provenance
    family: str = ""
    witness: Optional[ShatterVerdict] = field(default=None, compare=False)
    note: str = ""

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def to_dict(self, include_witnesses: bool = False) -> Dict[str, Any]:
        result = {
            "value": self.value,
            "provenance": self.provenance,
            "family": self.family,
            "note": self.note,
        }
        if self.witness is not None:
            result["witness"] = self.witness.to_dict(include_witnesses)
        return result


# ====================================================================================================
# pos 집합과 분할 검사
# ====================================================================================================

def _encode_masks(positive: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(positive.shape[1], dtype=np.int64)
    return positive.astype(np.int64) @ weights


def pos_set(family: FunctionFamily, params, point_set: PointSet) -> np.ndarray:
    """f(point) > 0 인 점의 불리언 마스크"""
    return family.evaluate(params, point_set.points)[0] > 0


def _scan(family: FunctionFamily, params: np.ndarray, points: np.ndarray) -> Dict[int, np.ndarray]:
    """파라미터 배치에서 마스크별 첫 실현 파라미터"""
    if params.shape[0] == 0:
        return {}
    with np.errstate(all="ignore"):
        masks = _encode_masks(family.evaluate(params, points) > 0)
    found: Dict[int, np.ndarray] = {}
    unique, first = np.unique(masks, return_index=True)
    for mask, index in zip(unique.tolist(), first.tolist()):
        found[int(mask)] = params[index].copy()
    return found


def is_shattered(family: FunctionFamily, point_set: PointSet, search_budget: int = DEFAULT_BUDGET,
                 seed: int = 0, max_points: int = MAX_SHATTER_POINTS, batch_size: int = DEFAULT_BATCH,
                 workers: Optional[int] = None) -> ShatterVerdict:
    """
    2^|I| 이분을 모두 실현하는 파라미터를 격자 + 시드 고정 무작위 추출로 탐색

    배치 b의 난수 스트림은 (seed, b)에서 파생되고 배치 순서대로 병합되므로
    작업자 수와 무관하게 결과가 같습니다.
    """
    m = len(point_set)
    if m > max_points:
        raise ShatteringLimitError(f"점 {m}개는 분할 검사 한도 {max_points}개를 초과합니다")
    if point_set.points.shape[1] != family.point_dim:
        raise DomainError(f"점 차원 {point_set.points.shape[1]} ≠ 함수족 정의역 차원 {family.point_dim}")

    total = 2 ** m
    points = point_set.points
    witnesses: Dict[int, np.ndarray] = {}
    draws = 0

    if family.grid is not None:
        grid = np.atleast_2d(family.grid)
        for mask, p in _scan(family, grid, points).items():
            witnesses.setdefault(mask, p)
        draws += grid.shape[0]

    n_batches = math.ceil(search_budget / batch_size)
    n_workers = min(get_max_workers(workers), max(1, n_batches))

    def _batch(b: int) -> Dict[int, np.ndarray]:
        size = min(batch_size, search_budget - b * batch_size)
        params = np.atleast_2d(family.param_sampler(derive_rng(seed, b), size))
        return _scan(family, params, points)

    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        for start in range(0, n_batches, n_workers):
            if len(witnesses) == total:
                break
            batch_ids = list(range(start, min(start + n_workers, n_batches)))
            for b, found in zip(batch_ids, executor.map(_batch, batch_ids)):
                for mask, p in found.items():
                    witnesses.setdefault(mask, p)
                draws += min(batch_size, search_budget - b * batch_size)

    # 보관 전 증인 재검증
    verified = {mask: p for mask, p in witnesses.items()
                if int(_encode_masks(pos_set(family, p, point_set)[None, :])[0]) == mask}
    if len(verified) != len(witnesses):
        logger.warning(f"재검증 실패 증인 {len(witnesses) - len(verified)}개 제거 ({family.name})")

    verdict = "shattered" if len(verified) == total else "not_witnessed"
    logger.debug(f"분할 검사: {family.name}, |I|={m}, 실현 {len(verified)}/{total}, 판정={verdict}")
    return ShatterVerdict(verdict, point_set, verified, draws)


def estimate_vc_lower_bound(family: FunctionFamily,
                            domain_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None,
                            q_max: int = 6, budget: int = DEFAULT_BUDGET, seed: int = 0,
                            point_trials: int = 4, workers: Optional[int] = None) -> VCSpec:
    """
    q = 1, 2, ... 순서로 표본 점집합의 분할을 시도해 VC 차원 하한을 구함

    크기 q에서 증인을 찾지 못하면 탐색을 멈춥니다.
    """
    if q_max > MAX_SHATTER_POINTS:
        raise ShatteringLimitError(f"q_max {q_max}는 분할 검사 한도 {MAX_SHATTER_POINTS}를 초과합니다")
    sampler = domain_sampler or family.domain_sampler
    if sampler is None:
        raise DomainError(f"함수족 '{family.name}'에 정의역 샘플러가 없습니다")

    best: Optional[ShatterVerdict] = None
    best_q = 0
    for q in range(1, q_max + 1):
        found = None
        for trial in range(point_trials):
            rng = derive_rng(seed, q, trial)
            try:
                candidate = PointSet(np.asarray(sampler(rng, q), dtype=float).reshape(q, family.point_dim))
            except DomainError:
                continue
            verdict = is_shattered(family, candidate, budget, seed=seed + 7919 * q + trial, workers=workers)
            if verdict.shattered:
                found = verdict
                break
        if found is None:
            break
        best, best_q = found, q
        logger.debug(f"{family.name}: 크기 {q} 점집합 분할 확인")

    logger.info(f"VC 하한 탐색 완료: {family.name} → q ≥ {best_q}")
    return VCSpec(value=best_q, provenance="lower_bound_found", family=family.name, witness=best,
                  note=f"q_max={q_max}, budget={budget}")


# ====================================================================================================
# 내장 함수족
# ====================================================================================================

def right_ray_family() -> FunctionFamily:
    """f_θ(x) = x - θ (1차원)"""
    return FunctionFamily(
        name="right_ray", param_dim=1, point_dim=1,
        evaluator=lambda P, X: X[:, 0][None, :] - P[:, [0]],
        param_sampler=lambda rng, size: rng.uniform(-2.0, 2.0, (size, 1)),
        domain_sampler=lambda rng, q: rng.uniform(-1.0, 1.0, (q, 1)))


def affine_family(dim: int = 2) -> FunctionFamily:
    """f(x) = p·x + p_{n+1} (ℝⁿ 위의 아핀 함수)"""
    return FunctionFamily(
        name=f"affine_{dim}d", param_dim=dim + 1, point_dim=dim,
        evaluator=lambda P, X: P[:, :-1] @ X.T + P[:, [-1]],
        param_sampler=lambda rng, size: rng.standard_normal((size, dim + 1)),
        domain_sampler=lambda rng, q: rng.standard_normal((q, dim)))


def perceptron_family(n: int) -> FunctionFamily:
    """f(x) = Σ w_i x_i - θ  (pos 집합이 퍼셉트론 출력 1 영역)"""
    return FunctionFamily(
        name=f"perceptron_{n}", param_dim=n + 1, point_dim=n,
        evaluator=lambda P, X: P[:, :-1] @ X.T - P[:, [-1]],
        param_sampler=lambda rng, size: rng.standard_normal((size, n + 1)),
        domain_sampler=lambda rng, q: rng.standard_normal((q, n)))


def _sine_points(rng: np.random.Generator, q: int) -> np.ndarray:
    factor = rng.uniform(1.0, 2.0)
    return (factor * 10.0 ** -np.arange(1, q + 1, dtype=float))[:, None]


def sine_family(frequency_max: float = 1e8) -> FunctionFamily:
    """f(x) = p₁ sin(p₂ x) (VC 차원 무한)"""

    def _sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.column_stack([rng.uniform(-1.0, 1.0, size), rng.uniform(0.0, frequency_max, size)])

    return FunctionFamily(
        name="sine", param_dim=2, point_dim=1,
        evaluator=lambda P, X: P[:, [0]] * np.sin(P[:, [1]] * X[:, 0][None, :]),
        param_sampler=_sampler, domain_sampler=_sine_points)


def shifted_loss_family(space: DecisionRuleSpace, beta_max: float = 4.0, param_scale: float = 2.0,
                        free_shift: bool = True,
                        domain_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
                        ) -> ShiftedLossFamily:
    """
    결정규칙 공간 H로부터 l_H 구성

    파라미터 p는 상자가 있으면 상자 내 균등, 없으면 N(0, param_scale²),
    β는 [0, beta_max] 균등 추출합니다.
    """
    k = space.param_dim

    def _evaluate(P: np.ndarray, Z: np.ndarray) -> np.ndarray:
        predictions = space.evaluate_many(P[:, :k], Z[:, :-1])
        losses = (predictions - Z[:, -1][None, :]) ** 2
        return losses - P[:, [k]] if free_shift else losses

    def _sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        if space.has_box:
            p = rng.uniform(space.lower, space.upper, (size, k))
        else:
            p = param_scale * rng.standard_normal((size, k))
        if not free_shift:
            return p
        return np.column_stack([p, rng.uniform(0.0, beta_max, size)])

    def _default_domain(rng: np.random.Generator, q: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, (q, space.instance_dim + 1))

    return ShiftedLossFamily(
        name=f"loss({space.name}){'' if free_shift else '[β=0]'}",
        param_dim=k + (1 if free_shift else 0), point_dim=space.instance_dim + 1,
        evaluator=_evaluate, param_sampler=_sampler, domain_sampler=domain_sampler or _default_domain,
        space=space, free_shift=free_shift)


# ====================================================================================================
# 레지스트리와 경계용 q 정책
# ====================================================================================================

def known_vc(family_kind: str, n: int = 0) -> VCSpec:
    """
    알려진 함수족의 VC 차원

    perceptron(n) → n+1, linear_span(n) → n, affine(ℝⁿ) → n+1 (정확값),
    polynomial_loss(차수 n) → 2n+2 (상한), sine → ∞
    """
    if family_kind == "perceptron":
        return VCSpec(n + 1, "exact_known", f"perceptron({n})")
    if family_kind == "linear_span":
        return VCSpec(n, "exact_known", f"linear_span({n})")
    if family_kind == "affine":
        return VCSpec(n + 1, "exact_known", f"affine({n})")
    if family_kind == "polynomial_loss":
        return VCSpec(2 * n + 2, "upper_bound", f"polynomial_loss({n})")
    if family_kind == "sine":
        return VCSpec(math.inf, "exact_known", "sine")
    raise UnknownFamilyError(f"레지스트리에 없는 함수족: {family_kind}")


def _registry_loss_vc(space: DecisionRuleSpace) -> VCSpec:
    """
    결정규칙 공간의 손실 함수족 l_H에 대한 레지스트리 q

    파라미터 k개의 선형 결합 공간(affine, linear_span, polynomial, 선형 ode_euler)은
    모두 q = 2k (차수 n 다항 손실의 2n+2 와 같은 패턴, 상한)
    """
    kind = space.family_kind
    if kind == "sine":
        raise InfiniteVCDimensionError(space.name)
    if kind == "polynomial":
        spec = known_vc("polynomial_loss", space.info.get("degree", space.param_dim - 1))
        return VCSpec(spec.value, spec.provenance, f"loss({space.name})")
    if kind in ("affine", "linear_span") or (kind == "ode_euler" and space.vc_metadata.get("linear")):
        return VCSpec(2 * space.param_dim, "upper_bound", f"loss({space.name})")
    raise UnknownFamilyError(f"레지스트리에 손실 함수족 q가 없는 공간: {space.name}")


def vc_for_bounds(space: DecisionRuleSpace, policy: Union[VCPolicySpec, str, None] = None,
                  value: Optional[float] = None) -> VCSpec:
    """
    ζ 계산에 사용할 q 결정

    정책: registry | user_declared(q) | parameter_count | auto
    (auto: registry → user_declared → parameter_count 순)
    """
    if policy is None:
        policy = VCPolicySpec()
    elif isinstance(policy, str):
        policy = VCPolicySpec(kind=policy, value=value)

    if space.family_kind == "sine" and policy.kind != "user_declared":
        raise InfiniteVCDimensionError(space.name)

    if policy.kind == "registry":
        return _registry_loss_vc(space)
    if policy.kind == "user_declared":
        return VCSpec(policy.value, "user_declared", f"loss({space.name})")
    if policy.kind == "parameter_count":
        return _parameter_count_vc(space)

    try:
        return _registry_loss_vc(space)
    except UnknownFamilyError:
        pass
    if policy.value is not None:
        return VCSpec(policy.value, "user_declared", f"loss({space.name})")
    return _parameter_count_vc(space)


def _parameter_count_vc(space: DecisionRuleSpace) -> VCSpec:
    q = space.param_dim + 1
    logger.warning(f"q를 자유 파라미터 수(β 포함)로 근사합니다: {space.name} → q={q} "
                   "(휴리스틱, 실제 VC 차원과 다를 수 있음)")
    return VCSpec(q, "parameter_count_heuristic", f"loss({space.name})",
                  note="free parameters of H plus the shift β")
