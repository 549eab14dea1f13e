# domain/stochastic.py
"""
[몬테카를로 검증기]

model 모듈의 폐형식 결과를 시뮬레이션으로 확인한다.

난수 생성기:
    numpy Philox (counter-based). 경로 묶음(chunk) i 는 SeedSequence(seed, spawn_key=(i,))에서
    나온 독립 스트림을 쓴다. 묶음 계획(경로 수 → 묶음 크기)은 스레드 수와 무관하게 고정이므로
    몇 개의 스레드로 돌려도 결과가 비트 단위로 같다.

병렬 실행:
    estimate_* 함수는 mapper(fn, chunks)를 받는다. mapper는 chunks 순서대로 결과 리스트를
    돌려줘야 한다. 기본값은 순차 실행이고, 서비스 계층은 워커 풀을 넘긴다.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from core.exceptions import ModelDomainError
from domain.model import (
    ModelParams,
    adjusted_root,
    bounded_liquidity_denominator,
    inventory_denominator,
)

FloatArray = NDArray[np.float64]

DEFAULT_CHUNK_PATHS = 50_000
DEFAULT_STEPS_PER_UNIT = 1000
TAU_CAP_MULTIPLE = 50.0


# =============================================================================
# 난수
# =============================================================================
def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """seed와 스트림 번호로 고정된 Philox 생성기"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class ChunkSpec:
    index: int
    start: int
    size: int


def plan_chunks(n_paths: int, chunk_paths: int = DEFAULT_CHUNK_PATHS) -> List[ChunkSpec]:
    if n_paths < 1:
        raise ModelDomainError(f"must be >= 1, got {n_paths}", "n_paths")
    if chunk_paths < 1:
        raise ModelDomainError(f"must be >= 1, got {chunk_paths}", "chunk_paths")
    return [
        ChunkSpec(i, start, min(chunk_paths, n_paths - start))
        for i, start in enumerate(range(0, n_paths, chunk_paths))
    ]


# =============================================================================
# 표본 모멘트 (순서 고정 병합)
# =============================================================================
@dataclass(frozen=True)
class Moments:
    """
    여러 변수의 표본 평균과 중심화 공적률 Σ(x_i − x̄)(y_i − ȳ).
    combine은 Chan의 병렬 병합식이며, 같은 순서로 병합하면 항상 같은 값이 나온다.
    """

    n: int
    mean: Tuple[float, ...]
    comoment: Tuple[Tuple[float, ...], ...]

    @classmethod
    def from_columns(cls, *columns: FloatArray) -> "Moments":
        n = int(columns[0].shape[0])
        means = tuple(math.fsum(col.tolist()) / n for col in columns)
        centered = [col - m for col, m in zip(columns, means)]
        comoment = tuple(
            tuple(math.fsum((centered[i] * centered[j]).tolist()) for j in range(len(columns)))
            for i in range(len(columns))
        )
        return cls(n, means, comoment)

    def combine(self, other: "Moments") -> "Moments":
        n = self.n + other.n
        d = [b - a for a, b in zip(self.mean, other.mean)]
        mean = tuple(a + di * other.n / n for a, di in zip(self.mean, d))
        weight = self.n * other.n / n
        comoment = tuple(
            tuple(
                self.comoment[i][j] + other.comoment[i][j] + d[i] * d[j] * weight
                for j in range(len(d))
            )
            for i in range(len(d))
        )
        return Moments(n, mean, comoment)

    def covariance(self, i: int, j: int) -> float:
        if self.n < 2:
            return 0.0
        return self.comoment[i][j] / (self.n - 1)


def reduce_moments(parts: Sequence[Moments]) -> Moments:
    return reduce(lambda acc, m: acc.combine(m), parts[1:], parts[0])


ChunkFn = Callable[[ChunkSpec], Moments]
ChunkMapper = Callable[[ChunkFn, Sequence[ChunkSpec]], List[Moments]]


def sequential_mapper(fn: ChunkFn, chunks: Sequence[ChunkSpec]) -> List[Moments]:
    return [fn(chunk) for chunk in chunks]


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_err: float
    n_paths: int


# =============================================================================
# GBM / 포아송 도착
# =============================================================================
@dataclass(frozen=True)
class GbmPath:
    q0: float
    times: FloatArray
    values: FloatArray
    seed: int

    def value_at(self, t: float) -> float:
        """t 이하의 마지막 격자점 값 (계단 보간)"""
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(idx, 0)])


def gbm_sample(
    q0: float,
    mu: float,
    sigma: float,
    horizon: float,
    step: float,
    seed: int,
) -> GbmPath:
    """
    정확 분포 갱신 Q_{t+h} = Q_t exp((μ − σ²/2)h + σ√h Z) 로 만든 GBM 경로.
    로그 경로를 (μ − σ²/2)t + σW_t 로 직접 계산하므로 σ = 0 이면 q0·e^{μt}와 정확히 같다.
    horizon이 step의 배수가 아니면 마지막 간격이 짧아진다.
    """
    if step <= 0:
        raise ModelDomainError(f"must be > 0, got {step}", "step")
    if q0 <= 0:
        raise ModelDomainError(f"must be > 0, got {q0}", "q0")
    if sigma < 0:
        raise ModelDomainError(f"must be >= 0, got {sigma}", "sigma")
    if horizon < step:
        raise ModelDomainError(f"must be >= step ({step}), got {horizon}", "horizon")

    n_full = int(math.floor(horizon / step + 1e-9))
    times = np.arange(n_full + 1, dtype=np.float64) * step
    if times[-1] < horizon * (1 - 1e-12):
        times = np.append(times, horizon)

    rng = make_rng(seed)
    increments = np.sqrt(np.diff(times)) * rng.standard_normal(times.shape[0] - 1)
    brownian = np.concatenate(([0.0], np.cumsum(increments)))
    log_path = (mu - 0.5 * sigma**2) * times + sigma * brownian
    return GbmPath(q0=q0, times=times, values=q0 * np.exp(log_path), seed=seed)


def gbm_terminal(q0: float, mu: float, sigma: float, horizon: float, n_paths: int, seed: int) -> FloatArray:
    """Q_T 표본 n_paths개 (한 번에 정확 분포로)"""
    if n_paths < 1:
        raise ModelDomainError(f"must be >= 1, got {n_paths}", "n_paths")
    z = make_rng(seed).standard_normal(n_paths)
    return q0 * np.exp((mu - 0.5 * sigma**2) * horizon + sigma * math.sqrt(horizon) * z)


def poisson_arrival(lam: float, seed: int) -> float:
    """도착률 λ 포아송 과정의 첫 도착 시각 τ ~ Exp(λ)"""
    return float(sample_arrival_times(lam, 1, seed)[0])


def sample_arrival_times(lam: float, n: int, seed: int) -> FloatArray:
    if lam <= 0:
        raise ModelDomainError(f"must be > 0, got {lam}", "lam")
    if n < 1:
        raise ModelDomainError(f"must be >= 1, got {n}", "n")
    return make_rng(seed).exponential(1.0 / lam, n)


# =============================================================================
# CPMM
# =============================================================================
@dataclass
class CpmmPool:
    reserve_a: float
    reserve_b: float

    def __post_init__(self) -> None:
        if self.reserve_a <= 0 or self.reserve_b <= 0:
            raise ModelDomainError(f"reserves must be > 0, got ({self.reserve_a}, {self.reserve_b})", "reserve")

    @property
    def price(self) -> float:
        """B 한 개의 A 가격 P = R^A / R^B"""
        return self.reserve_a / self.reserve_b

    @property
    def product(self) -> float:
        return self.reserve_a * self.reserve_b

    def swap_a_for_b(self, amount_in_a: float) -> float:
        if amount_in_a < 0:
            raise ModelDomainError(f"must be >= 0, got {amount_in_a}", "amount_in")
        if amount_in_a == 0:
            return 0.0
        new_a = self.reserve_a + amount_in_a
        new_b = self.reserve_b * self.reserve_a / new_a
        out = self.reserve_b - new_b
        self.reserve_a, self.reserve_b = new_a, new_b
        return out

    def swap_b_for_a(self, amount_in_b: float) -> float:
        if amount_in_b < 0:
            raise ModelDomainError(f"must be >= 0, got {amount_in_b}", "amount_in")
        if amount_in_b == 0:
            return 0.0
        new_b = self.reserve_b + amount_in_b
        new_a = self.reserve_a * self.reserve_b / new_b
        out = self.reserve_a - new_a
        self.reserve_a, self.reserve_b = new_a, new_b
        return out

    def rebalance_to_price(self, price: float) -> None:
        """곱 x·y를 유지한 채 가격 R^A/R^B를 price로 맞춘다 (외부 차익거래가 끝난 상태)."""
        if price <= 0:
            raise ModelDomainError(f"must be > 0, got {price}", "price")
        product = self.product
        self.reserve_a = math.sqrt(product * price)
        self.reserve_b = math.sqrt(product / price)


def cpmm_swap(pool: CpmmPool, amount_in_a: float) -> float:
    """A를 x만큼 넣고 받는 B: R^B x / (R^A + x). pool은 갱신된다."""
    return pool.swap_a_for_b(amount_in_a)


# =============================================================================
# 브릿지 이익 추정
# =============================================================================
def simulate_bridge_profits(params: ModelParams, rng: np.random.Generator, n: int) -> FloatArray:
    """
    경로별 실현 이익. 지연 보정 판매량 (s − 1)R^A (s = √p e^{μΔ/2})를 팔고,
    Δ 뒤의 환율 비율 Q_{τ+Δ}/Q_τ로 되판다:

        profit = R^A (s − 1)(s·u − 1),   u = exp(σ√Δ Z − σ²Δ/2)

    σ = 0 또는 Δ = 0 이면 u = 1 이라 경로별 값이 폐형식과 같다.
    """
    s = adjusted_root(params.p, params.mu, params.delta)
    if s < 1.0:
        return np.zeros(n, dtype=np.float64)
    z = rng.standard_normal(n)
    u = np.exp(params.sigma * math.sqrt(params.delta) * z - 0.5 * params.sigma**2 * params.delta)
    return params.reserve_a * (s - 1.0) * (s * u - 1.0)


def bridge_profit_chunk(params: ModelParams, seed: int, chunk: ChunkSpec) -> Moments:
    return Moments.from_columns(simulate_bridge_profits(params, make_rng(seed, chunk.index), chunk.size))


def estimate_bridge_profit(
    params: ModelParams,
    n_paths: int,
    seed: int,
    chunk_paths: int = DEFAULT_CHUNK_PATHS,
    mapper: Optional[ChunkMapper] = None,
) -> MonteCarloEstimate:
    if params.p < 1:
        raise ModelDomainError(f"must be >= 1, got {params.p}", "p")
    chunks = plan_chunks(n_paths, chunk_paths)
    parts = (mapper or sequential_mapper)(lambda c: bridge_profit_chunk(params, seed, c), chunks)
    total = reduce_moments(parts)
    return MonteCarloEstimate(
        mean=total.mean[0],
        std_err=math.sqrt(max(total.covariance(0, 0), 0.0) / total.n),
        n_paths=total.n,
    )


# =============================================================================
# 재고 비용 추정
# =============================================================================
def default_step(params: ModelParams, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> float:
    """min(1/λ, Δ, 1) / steps_per_unit. Δ = 0 은 후보에서 뺀다."""
    candidates = [1.0 / params.lam, 1.0]
    if params.delta > 0:
        candidates.append(params.delta)
    return min(candidates) / steps_per_unit


def inventory_path_chunk(
    params: ModelParams,
    step: float,
    seed: int,
    chunk: ChunkSpec,
    conditional: bool = True,
) -> Moments:
    """
    경로 묶음 하나를 시뮬레이션하고 (X, Y, Z) 모멘트를 돌려준다.

        τ ~ Exp(λ) (상한 50/λ), [0, τ] 를 경로별로 m = ceil(τ/step) 등분
        I_t = (1 − √(1/p)) (Q0/Q_t)^k R0^B,   R0^B = R0^A / Q0
        X   = Σ (Q_{i−1} − Q_i) I_{i−1}                    재고 가치 손실
        Y   = Q_τ I_τ                                      청산 시점 재고 가치
        Z   = Σ k²σ² R^B_{i−1} / (φ Q_{i−1}) · h          이차 거래 비용 적분

    conditional=True 이면 X, Y의 각 증분을 직전 상태에 대한 조건부 기댓값으로 바꾼다
    (GBM 전이 분포로 계산, 기댓값은 같고 분산만 줄어든다):

        E[Q_i − Q_{i−1} | Q_{i−1}]                = Q_{i−1}(e^{μh} − 1)
        E[Q_i I_i − Q_{i−1} I_{i−1} | Q_{i−1}]   = Q_{i−1} I_{i−1}(e^{(1−k)(μ − kσ²/2)h} − 1)
    """
    lam, mu, sigma, k, q0 = params.lam, params.mu, params.sigma, params.k, params.q0
    rng = make_rng(seed, chunk.index)
    n = chunk.size

    tau = np.minimum(rng.exponential(1.0 / lam, n), TAU_CAP_MULTIPLE / lam)
    m = np.maximum(1, np.ceil(tau / step)).astype(np.int64)
    order = np.argsort(-m, kind="stable")
    tau, m = tau[order], m[order]
    h = tau / m
    neg_m = -m  # 오름차순: 아직 진행 중인 경로는 항상 앞쪽에 모여 있다

    drift = (mu - 0.5 * sigma**2) * h
    vol = sigma * np.sqrt(h)
    inv_scale = (1.0 - 1.0 / math.sqrt(params.p)) * params.reserve_a / q0
    quad_scale = k**2 * sigma**2 * (params.reserve_a / q0) / params.phi
    cond_q = np.expm1(mu * h)
    cond_qi = np.expm1((1.0 - k) * (mu - 0.5 * k * sigma**2) * h)

    q = np.full(n, q0, dtype=np.float64)
    x = np.zeros(n, dtype=np.float64)
    y = np.zeros(n, dtype=np.float64)
    z = np.zeros(n, dtype=np.float64)

    for j in range(int(m[0])):
        active = int(np.searchsorted(neg_m, -j, side="left"))
        qa = q[:active]
        shrink = (q0 / qa) ** k
        inv_prev = inv_scale * shrink
        if quad_scale > 0:
            z[:active] += quad_scale * shrink / qa * h[:active]
        if conditional:
            x[:active] -= qa * inv_prev * cond_q[:active]
            y[:active] += qa * inv_prev * cond_qi[:active]
        q_next = qa * np.exp(drift[:active] + vol[:active] * rng.standard_normal(active))
        if not conditional:
            x[:active] += (qa - q_next) * inv_prev
        q[:active] = q_next

    if conditional:
        y += q0 * inv_scale
    else:
        y = q * inv_scale * (q0 / q) ** k
    return Moments.from_columns(x, y, z)


@dataclass(frozen=True)
class InventoryEstimate:
    cost_per_unit: float
    std_err: float
    n_paths: int
    step: float


def _run_inventory_paths(
    params: ModelParams,
    n_paths: int,
    seed: int,
    step: Optional[float],
    chunk_paths: int,
    mapper: Optional[ChunkMapper],
    conditional: bool,
) -> Tuple[Moments, float]:
    if params.p <= 1:
        raise ModelDomainError(f"must be > 1, got {params.p}", "p")
    h = default_step(params) if step is None else step
    if h <= 0:
        raise ModelDomainError(f"must be > 0, got {h}", "step")
    chunks = plan_chunks(n_paths, chunk_paths)
    parts = (mapper or sequential_mapper)(
        lambda c: inventory_path_chunk(params, h, seed, c, conditional), chunks
    )
    return reduce_moments(parts), h


def estimate_inventory_cost(
    params: ModelParams,
    n_paths: int,
    seed: int,
    step: Optional[float] = None,
    chunk_paths: int = DEFAULT_CHUNK_PATHS,
    mapper: Optional[ChunkMapper] = None,
    conditional: bool = True,
) -> InventoryEstimate:
    """
    C(I) / E0[Q_τ I_τ] 추정값 ΣX / ΣY. 표준오차는 비율 추정량의 델타 방법으로 구한다:
        Var ≈ Var(X − R·Y) / (n · Ȳ²)
    """
    total, h = _run_inventory_paths(params, n_paths, seed, step, chunk_paths, mapper, conditional)
    mean_x, mean_y = total.mean[0], total.mean[1]
    ratio = mean_x / mean_y
    var = total.covariance(0, 0) - 2 * ratio * total.covariance(0, 1) + ratio**2 * total.covariance(1, 1)
    std_err = math.sqrt(max(var, 0.0) / total.n) / abs(mean_y)
    return InventoryEstimate(ratio, std_err, total.n, h)


def estimate_bounded_liquidity_cost(
    params: ModelParams,
    n_paths: int,
    seed: int,
    step: Optional[float] = None,
    chunk_paths: int = DEFAULT_CHUNK_PATHS,
    mapper: Optional[ChunkMapper] = None,
    conditional: bool = True,
) -> InventoryEstimate:
    """
    유한 유동성 시장의 거래 단위당 재고 비용:

        (λ + (1 − k)(½kσ² − μ)) / (λ R0^A) · E[Z]  +  ΣX / ΣY

    R0^A = Q0 R0^B 로 두고 계산하므로 inventory_cost_bounded_liquidity와 같은 정규화를 쓴다.
    """
    if params.k > 0 and bounded_liquidity_denominator(params) <= 0:
        raise ModelDomainError("quadratic-cost integral diverges for these parameters", "lam")
    total, h = _run_inventory_paths(params, n_paths, seed, step, chunk_paths, mapper, conditional)
    scale = inventory_denominator(params) / (params.lam * params.reserve_a)
    mean_x, mean_y, mean_z = total.mean
    ratio = mean_x / mean_y

    # 선형화 L = scale·Z + (X − R·Y)/Ȳ
    c = total.covariance
    var = (
        scale**2 * c(2, 2)
        + (c(0, 0) - 2 * ratio * c(0, 1) + ratio**2 * c(1, 1)) / mean_y**2
        + 2 * scale * (c(2, 0) - ratio * c(2, 1)) / mean_y
    )
    return InventoryEstimate(scale * mean_z + ratio, math.sqrt(max(var, 0.0) / total.n), total.n, h)
