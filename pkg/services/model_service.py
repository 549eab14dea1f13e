# services/model_service.py
"""
[모델 서비스]

폐형식 모델의 곡선을 격자 위에서 계산해 CSV로 쓰고,
Monte Carlo 추정값과 폐형식 값을 비교하는 검증 표를 만든다.

출력 파일 (out_dir 아래):
    profit_curve.csv        p, frictionless_profit[, expected_bridge_profit]
    bridge_cost.csv         delta, bridging_cost
    lambda_threshold.csv    delta, lambda_star
    delta_threshold.csv     lambda, delta_star
    cost_diff.csv           mu, cost_difference
    validate.csv            closed-form vs Monte Carlo
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.events.interfaces import EventBusLike
from core.exceptions import ConfigError, DegenerateDenominatorError, ModelDomainError, NoFiniteThresholdError
from domain import model, stochastic
from domain.model import DriftThreshold, ModelParams
from domain.stochastic import ChunkMapper
from services.base_service import BaseService
from utilities.file_handler import save_csv
from workers.path_worker import PathChunkWorker

PROFIT_CURVE_FILE = "profit_curve.csv"
BRIDGE_COST_FILE = "bridge_cost.csv"
LAMBDA_THRESHOLD_FILE = "lambda_threshold.csv"
DELTA_THRESHOLD_FILE = "delta_threshold.csv"
COST_DIFF_FILE = "cost_diff.csv"
VALIDATE_FILE = "validate.csv"

VALIDATE_HEADER = (
    "case", "p", "mu", "sigma", "lam", "delta", "k",
    "closed_form", "estimate", "std_err", "rel_error", "tolerance", "passed",
)

BRIDGE_REL_TOL = 0.01
BRIDGE_SE_MULTIPLE = 3.0
INVENTORY_REL_TOL = 0.02
BOUNDED_REL_TOL = 0.05


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Grid:
    """[start, stop] 구간의 등간격 격자 (양 끝 포함)"""

    start: float
    stop: float
    points: int

    def __post_init__(self) -> None:
        if self.points < 2:
            raise ConfigError(f"grid needs >= 2 points, got {self.points}")
        if not self.stop > self.start:
            raise ConfigError(f"grid stop must be > start, got [{self.start}, {self.stop}]")

    def values(self) -> List[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.points)]

    @classmethod
    def parse(cls, text: str) -> "Grid":
        """'start:stop:points' 형식"""
        try:
            start, stop, points = text.split(":")
            return cls(float(start), float(stop), int(points))
        except ValueError as e:
            raise ConfigError(f"grid must look like start:stop:points, got {text!r}") from e


@dataclass(frozen=True)
class ValidationRow:
    case: str
    params: ModelParams
    closed_form: float
    estimate: float
    std_err: float
    tolerance: float

    @property
    def rel_error(self) -> float:
        if self.closed_form == 0:
            return abs(self.estimate)
        return abs(self.estimate - self.closed_form) / abs(self.closed_form)

    @property
    def passed(self) -> bool:
        return abs(self.estimate - self.closed_form) <= self.tolerance

    def to_row(self) -> List[str]:
        p = self.params
        return [
            self.case, _fmt(p.p), _fmt(p.mu), _fmt(p.sigma), _fmt(p.lam), _fmt(p.delta), _fmt(p.k),
            _fmt(self.closed_form), _fmt(self.estimate), _fmt(self.std_err),
            _fmt(self.rel_error), _fmt(self.tolerance), "true" if self.passed else "false",
        ]


@dataclass(frozen=True)
class ValidationPlan:
    """검증 격자. 기본값은 수용 기준의 격자이다."""

    bridge_p: Tuple[float, ...] = (1.5, 2.0, 3.0)
    bridge_mu: Tuple[float, ...] = (-0.0625, -0.2)
    bridge_delta: Tuple[float, ...] = (0.25, 0.5, 1.0, 2.0)
    bridge_sigma: float = 0.2
    reserve_a: float = 1e7
    inventory_p: float = 2.0
    inventory_mu: float = -0.0625
    inventory_k: Tuple[float, ...] = (0.0, 0.5)
    inventory_sigma: Tuple[float, ...] = (0.1, 0.3)
    inventory_lam: Tuple[float, ...] = (0.5, 1.0, 4.0)
    phi: float = 10.0
    bridge_paths: int = 1_000_000
    inventory_paths: int = 200_000


class ModelService(BaseService):
    def __init__(
        self,
        bus: Optional[EventBusLike] = None,
        threads: int = 1,
        chunk_paths: int = stochastic.DEFAULT_CHUNK_PATHS,
        bisection_tol: float = model.BISECTION_TOL,
        bisection_max_iter: int = model.BISECTION_MAX_ITER,
        steps_per_unit: int = stochastic.DEFAULT_STEPS_PER_UNIT,
    ):
        super().__init__(bus, threads)
        self.chunk_paths = chunk_paths
        self.steps_per_unit = steps_per_unit
        self.bisection_tol = bisection_tol
        self.bisection_max_iter = bisection_max_iter

    def _chunk_mapper(self) -> ChunkMapper:
        return self.mapper(PathChunkWorker)

    # ==========================================================
    # 곡선
    # ==========================================================
    def profit_curve(
        self,
        grid: Grid,
        reserve_a: float,
        mu: Optional[float] = None,
        delta: Optional[float] = None,
    ) -> List[List[str]]:
        """p에 따른 이익. mu와 delta가 주어지면 브릿지 지연을 반영한 기대 이익 열을 더한다."""
        bridged = mu is not None and delta is not None
        header = ["p", "frictionless_profit"] + (["expected_bridge_profit"] if bridged else [])
        rows = [header]
        for p in grid.values():
            row = [_fmt(p), _fmt(model.frictionless_profit(p, reserve_a))]
            if mu is not None and delta is not None:
                row.append(_fmt(model.expected_bridge_profit(p, mu, delta, reserve_a)))
            rows.append(row)
        return rows

    def bridge_cost_curve(self, p: float, mu: float, grid: Grid) -> List[List[str]]:
        """Δ에 따른 C^BR"""
        return [["delta", "bridging_cost"]] + [
            [_fmt(d), _fmt(model.bridging_cost(p, mu, d))] for d in grid.values()
        ]

    def threshold_curves(
        self, p: float, mu: float, delta_grid: Grid, lam_grid: Grid
    ) -> Tuple[List[List[str]], List[List[str]]]:
        """
        (Δ → λ*) 와 (λ → Δ*) 두 곡선.
        임계값이 정의되지 않는 점(Δ = 0, M ≤ 0)은 건너뛰고 개수만 로그로 남긴다.
        """
        lam_rows = [["delta", "lambda_star"]]
        skipped = 0
        for d in delta_grid.values():
            try:
                lam_rows.append([_fmt(d), _fmt(model.lambda_threshold(p, mu, d))])
            except ModelDomainError:
                skipped += 1

        delta_rows = [["lambda", "delta_star"]]
        for lam in lam_grid.values():
            try:
                delta_rows.append([_fmt(lam), _fmt(model.delta_threshold(p, mu, lam))])
            except ModelDomainError:
                skipped += 1
        if skipped:
            self.log_info(f"임계값이 없는 격자점 {skipped}개 제외")
        return lam_rows, delta_rows

    def cost_diff_curve(self, p: float, lam: float, delta: float, grid: Grid) -> List[List[str]]:
        """μ에 따른 (−μ/λ)(1 − √(1/p)) − C^BR. 양수면 브릿지가 더 싸다."""
        return [["mu", "cost_difference"]] + [
            [_fmt(mu), _fmt(model.cost_difference(p, mu, lam, delta))] for mu in grid.values()
        ]

    def crossover(self, p: float, lam: float, delta: float, mu_lo: float) -> Optional[DriftThreshold]:
        """
        비용 차이 곡선의 부호가 바뀌는 드리프트.
        1/λ > Δp 이면 [−λ, 0] 위의 µ̂, 아니면 [mu_lo, 0) 안쪽의 교차점. 없으면 None.
        """
        try:
            if 1.0 / lam > delta * p:
                return model.mu_threshold(p, lam, delta, self.bisection_tol, self.bisection_max_iter)
            return model.drift_crossover(p, lam, delta, mu_lo, self.bisection_tol, self.bisection_max_iter)
        except NoFiniteThresholdError as e:
            self.log_info(f"교차점 없음: {e}")
            return None

    # ==========================================================
    # 검증
    # ==========================================================
    def validate(self, plan: ValidationPlan, seed: int) -> List[ValidationRow]:
        """
        세 가지 비교를 수행한다. 각 경우의 seed는 (seed, 경우 번호)로 고정된다.
            bridge      기대 브릿지 이익  vs  경로 평균         허용: max(1%, 3 SE)
            inventory   −μ/λ               vs  비율 추정량       허용: 2%
            bounded     유한 유동성 공식   vs  이차 비용 추정량  허용: 5% (k > 0 만)
        """
        mapper = self._chunk_mapper()
        rows: List[ValidationRow] = []
        case_no = itertools.count()

        self.stage_started("validate:bridge")
        for p, mu, delta in itertools.product(plan.bridge_p, plan.bridge_mu, plan.bridge_delta):
            params = ModelParams(p=p, mu=mu, sigma=plan.bridge_sigma, delta=delta, reserve_a=plan.reserve_a)
            exact = model.expected_bridge_profit(p, mu, delta, plan.reserve_a)
            est = stochastic.estimate_bridge_profit(
                params, plan.bridge_paths, _case_seed(seed, next(case_no)), self.chunk_paths, mapper
            )
            tol = max(BRIDGE_REL_TOL * abs(exact), BRIDGE_SE_MULTIPLE * est.std_err)
            rows.append(ValidationRow("bridge", params, exact, est.mean, est.std_err, tol))
        self.stage_finished("validate:bridge", len(rows))

        self.stage_started("validate:inventory")
        before = len(rows)
        for k, sigma, lam in itertools.product(plan.inventory_k, plan.inventory_sigma, plan.inventory_lam):
            params = ModelParams(
                p=plan.inventory_p, mu=plan.inventory_mu, sigma=sigma, lam=lam, k=k, phi=plan.phi
            )
            exact = model.inventory_cost_per_unit(params.mu, lam)
            inv = stochastic.estimate_inventory_cost(
                params, plan.inventory_paths, _case_seed(seed, next(case_no)),
                step=stochastic.default_step(params, self.steps_per_unit),
                chunk_paths=self.chunk_paths, mapper=mapper,
            )
            rows.append(
                ValidationRow("inventory", params, exact, inv.cost_per_unit, inv.std_err, INVENTORY_REL_TOL * abs(exact))
            )

            if k == 0:
                continue
            try:
                bounded = model.inventory_cost_bounded_liquidity(params)
            except DegenerateDenominatorError as e:
                self.log_warning(f"bounded-liquidity 경우 제외 (k={k}, σ={sigma}, λ={lam}): {e}")
                continue
            est = stochastic.estimate_bounded_liquidity_cost(
                params, plan.inventory_paths, _case_seed(seed, next(case_no)),
                step=stochastic.default_step(params, self.steps_per_unit),
                chunk_paths=self.chunk_paths, mapper=mapper,
            )
            rows.append(ValidationRow("bounded", params, bounded, est.cost_per_unit, est.std_err, BOUNDED_REL_TOL * abs(bounded)))
        self.stage_finished("validate:inventory", len(rows) - before)

        failed = sum(1 for r in rows if not r.passed)
        if failed:
            self.log_warning(f"검증 {len(rows)}건 중 {failed}건 허용 오차 초과")
        else:
            self.log_info(f"검증 {len(rows)}건 모두 통과")
        return rows

    # ==========================================================
    # 파일 쓰기
    # ==========================================================
    def write_table(self, out_dir: Path, name: str, rows: Sequence[Sequence[str]]) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / name
        save_csv(path, [list(r) for r in rows])
        self.log_info(f"{name}: {len(rows) - 1}행 저장")
        return path

    def write_validation(self, out_dir: Path, rows: Sequence[ValidationRow]) -> Path:
        return self.write_table(out_dir, VALIDATE_FILE, [list(VALIDATE_HEADER)] + [r.to_row() for r in rows])


def _case_seed(seed: int, case: int) -> int:
    """검증 경우마다 독립된 seed. 경우 번호가 같으면 언제나 같은 값."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(case,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def drift_to_dict(t: DriftThreshold) -> Dict[str, Any]:
    return {
        "mu_hat": t.mu_hat,
        "interior": t.interior,
        "residual": t.residual,
        "iterations": t.iterations,
    }
