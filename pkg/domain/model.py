# domain/model.py
"""
[이익-비용 모델]

두 CPMM 사이의 단일 차익 기회에 대한 폐형식(closed-form) 계산 모음이다.

    p      상대 가격 Q/P (p > 1 이면 기회가 존재)
    mu     토큰 B 가격의 퍼센트 드리프트 (단위 시간당, 음수 가능)
    sigma  퍼센트 변동성 (sqrt(단위 시간)당)
    lam    기회 도착률 λ (단위 시간당 건수)
    delta  브릿지 소요 시간 Δ (같은 시간 단위)
    k      준비금 변화 지수: R_t^B = (Q0/Q_t)^k R_0^B
    phi    두 번째 CPMM의 유동성 배수 (유한 유동성 비용)
    q0     초기 환율 Q0

모든 함수는 순수 함수이므로 여러 스레드에서 동시에 불러도 안전하다.
사전 조건이 깨지면 ModelDomainError(및 하위 클래스)를 던진다.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Tuple

from scipy import optimize

from core.exceptions import (
    DegenerateDenominatorError,
    HypothesisViolatedError,
    ModelDomainError,
    NoFiniteThresholdError,
)

BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200
CROSSOVER_SCAN_POINTS = 1000


# =============================================================================
# 파라미터
# =============================================================================
@dataclass(frozen=True)
class ModelParams:
    p: float
    mu: float = 0.0
    sigma: float = 0.0
    lam: float = 1.0
    delta: float = 0.0
    reserve_a: float = 1.0
    reserve_b: float = 1.0
    k: float = 0.0
    phi: float = 1.0
    q0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p", "mu", "sigma", "lam", "delta", "reserve_a", "reserve_b", "k", "phi", "q0"):
            if not math.isfinite(getattr(self, name)):
                raise ModelDomainError("must be finite", name)
        for name in ("p", "lam", "reserve_a", "reserve_b", "phi", "q0"):
            if getattr(self, name) <= 0:
                raise ModelDomainError(f"must be > 0, got {getattr(self, name)}", name)
        _require(self.sigma >= 0, f"must be >= 0, got {self.sigma}", "sigma")
        _require(self.delta >= 0, f"must be >= 0, got {self.delta}", "delta")
        _require(0.0 <= self.k <= 1.0, f"must be in [0, 1], got {self.k}", "k")


def _require(condition: bool, message: str, parameter: str) -> None:
    if not condition:
        raise ModelDomainError(message, parameter)


def _require_opportunity(p: float, strict: bool = False) -> None:
    if strict:
        _require(p > 1, f"must be > 1, got {p}", "p")
    else:
        _require(p >= 1, f"must be >= 1, got {p}", "p")


# =============================================================================
# 이익과 최적 거래량
# =============================================================================
def _gap_profit(scaled_root: float, reserve_a: float) -> float:
    # (s - 1)^2 R^A, 곱셈 순서는 stochastic의 경로별 이익 계산과 같다
    return reserve_a * (scaled_root - 1.0) * (scaled_root - 1.0)


def adjusted_root(p: float, mu: float, delta: float) -> float:
    """√p·e^{μΔ/2}: 브릿지 도착 시점의 기대 가격을 반영한 비율"""
    return math.sqrt(p) * math.exp(mu * delta / 2.0)


def frictionless_profit(p: float, reserve_a: float) -> float:
    """
    즉시 브릿지(또는 재고)로 기회를 전부 취했을 때의 이익 (√p − 1)² R^A.
    p = 1은 이익 0인 유효 입력이다.
    """
    _require_opportunity(p)
    _require(reserve_a > 0, f"must be > 0, got {reserve_a}", "reserve_a")
    return _gap_profit(math.sqrt(p), reserve_a)


def expected_bridge_profit(p: float, mu: float, delta: float, reserve_a: float) -> float:
    """
    Δ 만큼 늦게 도착하는 브릿지 거래의 기대 이익 (√p e^{μΔ/2} − 1)² R^A.
    기회가 사라지면(√p e^{μΔ/2} < 1) 거래하지 않으므로 0이다.
    """
    _require_opportunity(p)
    _require(delta >= 0, f"must be >= 0, got {delta}", "delta")
    _require(reserve_a > 0, f"must be > 0, got {reserve_a}", "reserve_a")
    s = adjusted_root(p, mu, delta)
    if s < 1.0:
        return 0.0
    return _gap_profit(s, reserve_a)


@dataclass(frozen=True)
class TradeSizes:
    sell_a: float
    buy_b: float
    adjusted_sell_a: float
    opportunity_vanished: bool


def optimal_trade_sizes(params: ModelParams) -> TradeSizes:
    """
    첫 번째 시장에서 파는 A 수량 (√p − 1)R^A와 받는 B 수량 (1 − √(1/p))R^B.

    delta > 0 이면 브릿지 지연을 반영한 판매량 (√p e^{μΔ/2} − 1)R^A도 함께 돌려준다.
    그 값이 음수가 되는 경우에는 거래하지 않으며 opportunity_vanished=True, adjusted_sell_a=0.
    """
    _require_opportunity(params.p)
    root = math.sqrt(params.p)
    sell_a = (root - 1.0) * params.reserve_a
    buy_b = (1.0 - 1.0 / root) * params.reserve_b

    s = adjusted_root(params.p, params.mu, params.delta)
    if s < 1.0:
        return TradeSizes(sell_a, buy_b, 0.0, True)
    return TradeSizes(sell_a, buy_b, (s - 1.0) * params.reserve_a, False)


# =============================================================================
# 비용
# =============================================================================
def bridging_cost(p: float, mu: float, delta: float) -> float:
    """
    브릿지 지연 비용 C^BR = (√p − 1)² − (√p e^{μΔ/2} − 1)² (AMM 유동성 단위당).

    두 제곱의 차를 (a − b)(a + b)로 풀어 계산하므로 μ → 0 근처에서도 상쇄 오차가 없다.
    기회가 사라지는 구간(√p e^{μΔ/2} < 1)에서는 이익 전체 (√p − 1)²을 잃는다.
    """
    _require_opportunity(p)
    _require(delta >= 0, f"must be >= 0, got {delta}", "delta")
    root = math.sqrt(p)
    s = adjusted_root(p, mu, delta)
    if s < 1.0:
        return (root - 1.0) * (root - 1.0)
    # a - b = √p (1 - e^{μΔ/2}),  a + b = √p + s - 2
    return -root * math.expm1(mu * delta / 2.0) * (root + s - 2.0)


def inventory_cost_per_unit(mu: float, lam: float) -> float:
    """재고 보유 비용 (거래 단위당) −μ/λ"""
    _require(lam > 0, f"must be > 0, got {lam}", "lam")
    return -mu / lam


def inventory_denominator(params: ModelParams) -> float:
    """λ + (1 − k)(½kσ² − μ)"""
    return params.lam + (1.0 - params.k) * (0.5 * params.k * params.sigma**2 - params.mu)


@dataclass(frozen=True)
class InventoryCost:
    cost: float
    expected_inventory_value: float


def inventory_cost_total(params: ModelParams) -> InventoryCost:
    """
    시점 0 기준 재고 비용 C(I)와 청산 시점 재고 가치 E0[Q_τ I_τ].

        C(I)        = −μ (1 − √(1/p)) R0^A / D
        E0[Q_τ I_τ] =  λ (1 − √(1/p)) R0^A / D,    D = λ + (1 − k)(½kσ² − μ)

    D ≤ 0 이면 기댓값이 발산하므로 DegenerateDenominatorError.
    """
    _require_opportunity(params.p, strict=True)
    denom = inventory_denominator(params)
    if denom <= 0:
        raise DegenerateDenominatorError(f"λ + (1-k)(kσ²/2 - μ) = {denom} <= 0", "lam")
    scale = (1.0 - 1.0 / math.sqrt(params.p)) * params.reserve_a / denom
    return InventoryCost(cost=-params.mu * scale, expected_inventory_value=params.lam * scale)


def bounded_liquidity_denominator(params: ModelParams) -> float:
    """λ/(k + 1) + μ − ½σ²(k + 2)"""
    return params.lam / (params.k + 1.0) + params.mu - 0.5 * params.sigma**2 * (params.k + 2.0)


def inventory_cost_bounded_liquidity(params: ModelParams) -> float:
    """
    두 번째 시장의 유동성이 φ배로 유한할 때, 이차 거래 비용을 더한 거래 단위당 재고 비용.

        D k²σ² / ((1 + k) φ λ Q0² (λ/(k+1) + μ − ½σ²(k+2))) − μ/λ

    k = 0 이면 재고가 변하지 않아 거래 비용 항이 사라지고 정확히 −μ/λ가 된다.
    k > 0 에서 두 번째 분모가 0 이하이면 적분 기댓값이 발산한다.
    """
    _require_opportunity(params.p, strict=True)
    denom = inventory_denominator(params)
    if denom <= 0:
        raise DegenerateDenominatorError(f"λ + (1-k)(kσ²/2 - μ) = {denom} <= 0", "lam")
    base = inventory_cost_per_unit(params.mu, params.lam)
    if params.k == 0:
        return base

    growth_denom = bounded_liquidity_denominator(params)
    if growth_denom <= 0:
        raise DegenerateDenominatorError(f"λ/(k+1) + μ - σ²(k+2)/2 = {growth_denom} <= 0", "lam")
    quadratic = (denom * params.k**2 * params.sigma**2) / (
        (1.0 + params.k) * params.phi * params.lam * params.q0**2 * growth_denom
    )
    return quadratic + base


# =============================================================================
# 전략 결정과 임계값
# =============================================================================
class Strategy(str, Enum):
    INVENTORY = "Inventory"
    BRIDGE = "Bridge"


@dataclass(frozen=True)
class StrategyDecision:
    choice: Strategy
    margin: float
    boundary: bool
    inventory_cost: float
    bridging_cost: float


def inventory_side(p: float, mu: float, lam: float) -> float:
    """재고 비용을 AMM 유동성 단위로 환산한 값 (−μ/λ)(1 − √(1/p))"""
    return inventory_cost_per_unit(mu, lam) * (1.0 - 1.0 / math.sqrt(p))


def cost_difference(p: float, mu: float, lam: float, delta: float) -> float:
    """(−μ/λ)(1 − √(1/p)) − C^BR. 양수면 브릿지가 더 싸다."""
    return inventory_side(p, mu, lam) - bridging_cost(p, mu, delta)


def decide_strategy(params: ModelParams) -> StrategyDecision:
    """
    (−μ/λ)(1 − √(1/p)) < C^BR 이면 Inventory, 아니면 Bridge.
    등호(margin == 0)는 Bridge + boundary=True.
    """
    _require_opportunity(params.p, strict=True)
    inv = inventory_side(params.p, params.mu, params.lam)
    br = bridging_cost(params.p, params.mu, params.delta)
    margin = br - inv
    if margin > 0:
        return StrategyDecision(Strategy.INVENTORY, margin, False, inv, br)
    return StrategyDecision(Strategy.BRIDGE, margin, margin == 0, inv, br)


def lambda_threshold(p: float, mu: float, delta: float) -> float:
    """λ* = (−μ / C^BR)(1 − √(1/p)). λ > λ* 이면 재고 전략이 유리하다."""
    _require_opportunity(p, strict=True)
    _require(mu < 0, f"must be < 0, got {mu}", "mu")
    _require(delta > 0, f"must be > 0, got {delta}", "delta")
    cbr = bridging_cost(p, mu, delta)
    if cbr <= 0:
        raise NoFiniteThresholdError(f"C^BR = {cbr} leaves the arrival-rate threshold undefined", "delta")
    return -mu / cbr * (1.0 - 1.0 / math.sqrt(p))


def delta_threshold(p: float, mu: float, lam: float) -> float:
    """
    Δ* = −(2/μ) ln(√p / (1 + √M)),  M = (√p − 1)² + (μ/λ)(1 − 1/√p).
    Δ < Δ* 이면 브릿지 전략이 유리하다.
    """
    _require_opportunity(p, strict=True)
    _require(mu < 0, f"must be < 0, got {mu}", "mu")
    _require(lam > 0, f"must be > 0, got {lam}", "lam")
    root = math.sqrt(p)
    m = (root - 1.0) ** 2 + (mu / lam) * (1.0 - 1.0 / root)
    if m <= 0:
        raise NoFiniteThresholdError(f"M = {m} <= 0: inventory is cheaper for every bridging time", "lam")
    return -(2.0 / mu) * math.log(root / (1.0 + math.sqrt(m)))


@dataclass(frozen=True)
class DriftThreshold:
    mu_hat: float
    interior: bool
    residual: float
    iterations: int


def _bisect(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_iter: int,
) -> Tuple[float, int]:
    root, result = optimize.bisect(fn, lo, hi, xtol=tol, maxiter=max_iter, full_output=True, disp=False)
    if not result.converged:
        raise NoFiniteThresholdError(f"bisection did not converge in {max_iter} iterations", "mu")
    return float(root), int(result.iterations)


def mu_threshold(
    p: float,
    lam: float,
    delta: float,
    tol: float = BISECTION_TOL,
    max_iter: int = BISECTION_MAX_ITER,
) -> DriftThreshold:
    """
    1/λ > Δp 일 때 [−λ, 0] 위에서 비용 차이 함수의 부호가 바뀌는 드리프트 µ̂.
    µ̂보다 낮은 드리프트에서는 Bridge, 높은 드리프트에서는 Inventory가 선택된다.

    비용 차이 함수는 μ = 0에서 항상 0이므로, 가정 아래에서는 µ̂ = 0(구간 끝점)이
    돌려지고 interior=False로 표시된다. 양 끝의 부호가 같으면 |값|이 작은 끝점을 돌려준다.
    """
    _require_opportunity(p, strict=True)
    _require(lam > 0, f"must be > 0, got {lam}", "lam")
    _require(delta >= 0, f"must be >= 0, got {delta}", "delta")
    if not 1.0 / lam > delta * p:
        raise HypothesisViolatedError(f"1/λ = {1.0 / lam} is not greater than Δp = {delta * p}", "lam")

    def fn(mu: float) -> float:
        return cost_difference(p, mu, lam, delta)

    lo, hi = -lam, 0.0
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0.0:
        return DriftThreshold(lo, False, 0.0, 0)
    if f_hi == 0.0:
        return DriftThreshold(hi, False, 0.0, 0)
    if (f_lo > 0) == (f_hi > 0):
        edge = lo if abs(f_lo) < abs(f_hi) else hi
        return DriftThreshold(edge, False, fn(edge), 0)

    root, iterations = _bisect(fn, lo, hi, tol, max_iter)
    return DriftThreshold(root, True, fn(root), iterations)


def drift_crossover(
    p: float,
    lam: float,
    delta: float,
    mu_lo: float = -1.0,
    tol: float = BISECTION_TOL,
    max_iter: int = BISECTION_MAX_ITER,
) -> DriftThreshold:
    """
    [mu_lo, 0) 안쪽에서 비용 차이 함수가 부호를 바꾸는 드리프트를 찾는다.
    mu_threshold의 가정(1/λ > Δp)이 성립하지 않을 때 비용 차이 곡선이 0을 지나는 지점이다.

    0에 가까운 쪽부터 격자를 훑어 처음 부호가 바뀌는 칸을 이분법으로 좁힌다.
    """
    _require_opportunity(p, strict=True)
    _require(lam > 0, f"must be > 0, got {lam}", "lam")
    _require(delta >= 0, f"must be >= 0, got {delta}", "delta")
    _require(mu_lo < 0, f"must be < 0, got {mu_lo}", "mu_lo")

    def fn(mu: float) -> float:
        return cost_difference(p, mu, lam, delta)

    # 격자: mu_lo·i/N (i = 1..N), 0 바로 아래에서 mu_lo까지
    upper = mu_lo / CROSSOVER_SCAN_POINTS
    f_upper = fn(upper)
    for i in range(2, CROSSOVER_SCAN_POINTS + 1):
        mu = mu_lo * i / CROSSOVER_SCAN_POINTS
        f_mu = fn(mu)
        if f_mu == 0.0:
            return DriftThreshold(mu, True, 0.0, 0)
        if (f_mu > 0) != (f_upper > 0):
            root, iterations = _bisect(fn, mu, upper, tol, max_iter)
            return DriftThreshold(root, True, fn(root), iterations)
        upper, f_upper = mu, f_mu

    raise NoFiniteThresholdError(f"cost difference keeps one sign on [{mu_lo}, 0)", "mu")
