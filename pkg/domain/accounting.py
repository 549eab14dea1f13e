# domain/accounting.py
"""
[USD 평가와 집계]

    NetProfit = (USD_out,leg2 − USD_in,leg1) − (가스 + 코인베이스 팁 + 브릿지 수수료)

- 토큰 금액 × (클래스, 시간 버킷) 가격. 필요한 가격이 하나라도 없으면 priced=False.
- 브릿지 수수료는 출발 체인 호출분만 센다 (사용자가 직접 부르는 쪽).
- USD 합계는 math.fsum (보정 합산), 백분위수는 nearest-rank.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from core.exceptions import ConfigError
from domain.bridgelink import ClassifiedMatch, ExecutionClass, ExecutionMethod
from domain.chaindata import ChainDirectory, EquivalenceRegistry, PriceTable
from domain.detector import ArbMatch
from domain.statistics import WelchResult, utc_date, welch_test

SETTLEMENT_WINDOWS = (600, 1800)
PERCENTILES = (25, 50, 75)
ALL = "All"


class VolumeConvention(str, Enum):
    LEG1_IN = "leg1_in"
    LEG2_OUT = "leg2_out"
    MEAN = "mean"


# =============================================================================
# 이익 계산
# =============================================================================
@dataclass(frozen=True)
class ProfitBreakdown:
    priced: bool
    usd_in_leg1: Optional[float] = None
    usd_out_leg2: Optional[float] = None
    gas_fees_usd: Optional[float] = None
    coinbase_tips_usd: Optional[float] = None
    bridge_fees_usd: Optional[float] = None
    revenue_usd: Optional[float] = None
    net_profit_usd: Optional[float] = None
    missing: Tuple[str, ...] = ()

    @property
    def costs_usd(self) -> Optional[float]:
        if not self.priced:
            return None
        return _costs(self.gas_fees_usd or 0.0, self.coinbase_tips_usd or 0.0, self.bridge_fees_usd or 0.0)

    def volume(self, convention: VolumeConvention = VolumeConvention.LEG1_IN) -> Optional[float]:
        if self.usd_in_leg1 is None or self.usd_out_leg2 is None:
            return None
        if convention is VolumeConvention.LEG1_IN:
            return self.usd_in_leg1
        if convention is VolumeConvention.LEG2_OUT:
            return self.usd_out_leg2
        return (self.usd_in_leg1 + self.usd_out_leg2) / 2.0


def _costs(gas: float, tips: float, bridge: float) -> float:
    return math.fsum((gas, tips, bridge))


@dataclass(frozen=True)
class PricingContext:
    prices: PriceTable
    registry: EquivalenceRegistry
    chains: ChainDirectory


def price_match(
    match: ArbMatch,
    ctx: PricingContext,
    execution: Optional[ExecutionClass] = None,
) -> ProfitBreakdown:
    leg1, leg2 = match.leg1, match.leg2
    t1, t2 = leg1.timestamp, leg2.timestamp
    missing: List[str] = []

    def lookup(cls: Optional[str], ts: int, what: str) -> float:
        if cls is None:
            missing.append(f"{what}: unmapped asset")
            return 0.0
        usd = ctx.prices.at(cls, ts)
        if usd is None:
            missing.append(f"{what}: no {cls} price at hour {ts // 3600}")
            return 0.0
        return usd

    def native_of(chain: str) -> Optional[str]:
        info = ctx.chains.get(chain)
        return info.native_class if info is not None else None

    p_in = lookup(ctx.registry.class_of(leg1.chain, leg1.asset_in), t1, "leg1 input")
    p_out = lookup(ctx.registry.class_of(leg2.chain, leg2.asset_out), t2, "leg2 output")
    n1 = lookup(native_of(leg1.chain), t1, "leg1 gas")
    n2 = lookup(native_of(leg2.chain), t2, "leg2 gas")

    bridge_fee = Decimal(0)
    nb = 0.0
    if execution is not None and execution.bridge_out is not None and execution.bridge_fee_native:
        bridge_fee = execution.bridge_fee_native
        nb = lookup(native_of(execution.bridge_out.chain), execution.bridge_out.timestamp, "bridge fee")

    if missing:
        return ProfitBreakdown(priced=False, missing=tuple(missing))

    usd_in = float(leg1.amount_in) * p_in
    usd_out = float(leg2.amount_out) * p_out
    gas = math.fsum((float(leg1.gas_fee_native) * n1, float(leg2.gas_fee_native) * n2))
    tips = math.fsum((float(leg1.coinbase_tip_native) * n1, float(leg2.coinbase_tip_native) * n2))
    bridge = float(bridge_fee) * nb
    revenue = usd_out - usd_in
    return ProfitBreakdown(
        priced=True,
        usd_in_leg1=usd_in,
        usd_out_leg2=usd_out,
        gas_fees_usd=gas,
        coinbase_tips_usd=tips,
        bridge_fees_usd=bridge,
        revenue_usd=revenue,
        net_profit_usd=revenue - _costs(gas, tips, bridge),
    )


@dataclass(frozen=True)
class AccountedMatch:
    match: ArbMatch
    execution: ExecutionClass
    profit: ProfitBreakdown

    @property
    def method(self) -> str:
        return self.execution.method.value

    @property
    def settlement(self) -> int:
        return self.match.leg2.timestamp - self.match.leg1.timestamp

    @property
    def chain_pair(self) -> str:
        a, b = sorted((self.match.leg1.chain, self.match.leg2.chain))
        return f"{a}-{b}"

    @property
    def entity_kind(self) -> str:
        """originator가 곧 엔티티면 EOA, 컨트랙트를 통해 묶였으면 SC"""
        return "EOA" if self.match.entity == self.match.leg1.originator else "SC"


def account(classified: Iterable[ClassifiedMatch], ctx: PricingContext) -> List[AccountedMatch]:
    return [AccountedMatch(cm.match, cm.execution, price_match(cm.match, ctx, cm.execution)) for cm in classified]


# =============================================================================
# 백분위수 / 정산 시간
# =============================================================================
def nearest_rank(values: Sequence[float], q: float) -> float:
    """nearest-rank 백분위수: 정렬 후 ceil(q/100 · n)번째 값"""
    if not values:
        raise ValueError("nearest_rank of an empty sequence")
    if not 0 < q <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {q}")
    ordered = sorted(values)
    rank = max(1, math.ceil(q / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class Percentiles:
    n: int
    p25: float
    p50: float
    p75: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Percentiles":
        return cls(len(values), *(nearest_rank(values, q) for q in PERCENTILES))

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "p25": self.p25, "p50": self.p50, "p75": self.p75}


def settlement_stats(rows: Iterable[AccountedMatch]) -> Dict[str, Percentiles]:
    """실행 방식별 (그리고 'All') 정산 시간 백분위수. 매치가 없는 방식은 빠진다."""
    by_method: Dict[str, List[float]] = defaultdict(list)
    for row in rows:
        by_method[row.method].append(row.settlement)
        by_method[ALL].append(row.settlement)
    return {m: Percentiles.of(v) for m, v in sorted(by_method.items())}


def window_shares(rows: Sequence[AccountedMatch], windows: Sequence[int] = SETTLEMENT_WINDOWS) -> Dict[str, Dict[str, float]]:
    """방식별로 정산 시간이 각 창(초) 이하인 매치 비율"""
    groups: Dict[str, List[int]] = defaultdict(list)
    for row in rows:
        groups[row.method].append(row.settlement)
        groups[ALL].append(row.settlement)
    return {
        m: {f"le_{w}s": sum(1 for s in gaps if s <= w) / len(gaps) for w in windows}
        for m, gaps in sorted(groups.items())
    }


# =============================================================================
# 집중도
# =============================================================================
@dataclass(frozen=True)
class CdfPoint:
    rank: int
    key: str
    value: float
    cumulative_share: float


def concentration_cdf(
    rows: Iterable[AccountedMatch],
    by: str = "count",
    key: Callable[[AccountedMatch], str] = lambda r: r.match.entity,
    convention: VolumeConvention = VolumeConvention.LEG1_IN,
) -> List[CdfPoint]:
    """
    키(기본: 엔티티)별 기여를 내림차순으로 정렬한 누적 비율. 마지막 값은 1.
    by="volume"이면 평가된 매치의 거래량만 센다.
    """
    if by not in ("count", "volume"):
        raise ConfigError(f"concentration_cdf: by must be 'count' or 'volume', got {by!r}")
    contrib: Dict[str, List[float]] = defaultdict(list)
    for row in rows:
        if by == "count":
            contrib[key(row)].append(1.0)
        else:
            vol = row.profit.volume(convention)
            if vol is not None:
                contrib[key(row)].append(vol)
    totals = {k: math.fsum(v) for k, v in contrib.items()}
    grand = math.fsum(totals.values())
    if not totals or grand <= 0:
        return []
    ordered = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    points: List[CdfPoint] = []
    running: List[float] = []
    for rank, (k, v) in enumerate(ordered, start=1):
        running.append(v)
        points.append(CdfPoint(rank, k, v, math.fsum(running) / grand))
    return points


# =============================================================================
# 그룹 통계 (체인 쌍 / 엔티티 / 브릿지 비용)
# =============================================================================
def _fsum_opt(values: Iterable[Optional[float]]) -> float:
    return math.fsum(v for v in values if v is not None)


@dataclass(frozen=True)
class GroupStats:
    key: str
    count: int
    priced: int
    total_profit_usd: float
    avg_profit_usd: Optional[float]
    total_volume_usd: float
    avg_volume_usd: Optional[float]
    method_shares: Dict[str, float]
    settlement: Percentiles
    kind: Optional[str] = None

    @property
    def bridge_share(self) -> float:
        return 1.0 - self.method_shares.get(ExecutionMethod.INVENTORY.value, 0.0)


def _group_stats(
    key: str,
    rows: Sequence[AccountedMatch],
    convention: VolumeConvention,
    kind: Optional[str] = None,
) -> GroupStats:
    priced = [r for r in rows if r.profit.priced]
    profit = _fsum_opt(r.profit.net_profit_usd for r in priced)
    volume = _fsum_opt(r.profit.volume(convention) for r in priced)
    counts: Dict[str, int] = defaultdict(int)
    for r in rows:
        counts[r.method] += 1
    return GroupStats(
        key=key,
        count=len(rows),
        priced=len(priced),
        total_profit_usd=profit,
        avg_profit_usd=profit / len(priced) if priced else None,
        total_volume_usd=volume,
        avg_volume_usd=volume / len(priced) if priced else None,
        method_shares={m.value: counts.get(m.value, 0) / len(rows) for m in ExecutionMethod},
        settlement=Percentiles.of([r.settlement for r in rows]),
        kind=kind,
    )


def pair_stats(rows: Iterable[AccountedMatch], convention: VolumeConvention = VolumeConvention.LEG1_IN) -> List[GroupStats]:
    groups: Dict[str, List[AccountedMatch]] = defaultdict(list)
    for row in rows:
        groups[row.chain_pair].append(row)
    stats = [_group_stats(k, v, convention) for k, v in groups.items()]
    return sorted(stats, key=lambda s: (-s.count, s.key))


def entity_stats(rows: Iterable[AccountedMatch], convention: VolumeConvention = VolumeConvention.LEG1_IN) -> List[GroupStats]:
    groups: Dict[str, List[AccountedMatch]] = defaultdict(list)
    for row in rows:
        groups[row.match.entity].append(row)
    stats = [_group_stats(k, v, convention, kind=v[0].entity_kind) for k, v in groups.items()]
    return sorted(stats, key=lambda s: (-s.total_volume_usd, -s.count, s.key))


@dataclass(frozen=True)
class BridgeCostStats:
    method: str
    count: int
    mean_latency_seconds: Optional[float]
    mean_bridge_fee_usd: Optional[float]
    bridge_fee_ratio: Optional[float]


def bridge_cost_stats(rows: Iterable[AccountedMatch]) -> List[BridgeCostStats]:
    """브릿지 방식별 평균 지연, 평균 브릿지 수수료, 전체 수수료 중 브릿지 수수료 비율"""
    groups: Dict[str, List[AccountedMatch]] = defaultdict(list)
    for row in rows:
        if row.execution.is_bridge:
            groups[row.method].append(row)
    out: List[BridgeCostStats] = []
    for method, items in sorted(groups.items()):
        latencies = [r.execution.bridge_latency_seconds for r in items if r.execution.bridge_latency_seconds is not None]
        priced = [r.profit for r in items if r.profit.priced]
        bridge_fees = _fsum_opt(p.bridge_fees_usd for p in priced)
        all_fees = _fsum_opt(p.costs_usd for p in priced)
        out.append(
            BridgeCostStats(
                method=method,
                count=len(items),
                mean_latency_seconds=math.fsum(latencies) / len(latencies) if latencies else None,
                mean_bridge_fee_usd=bridge_fees / len(priced) if priced else None,
                bridge_fee_ratio=bridge_fees / all_fees if all_fees > 0 else None,
            )
        )
    return out


# =============================================================================
# 일별 집계 / 이벤트 전후 비교
# =============================================================================
@dataclass(frozen=True)
class DailyAggregate:
    date: str
    trade_count: int
    priced_count: int
    volume_usd: float
    fee_usd: float
    # 평가된 매치가 없는 날은 None (수수료 비교에서 빠진다)
    mean_fee_usd: Optional[float]
    per_entity: Dict[str, int] = field(default_factory=lambda: dict[str, int]())
    per_chain: Dict[str, int] = field(default_factory=lambda: dict[str, int]())


def daily_aggregates(
    rows: Iterable[AccountedMatch], convention: VolumeConvention = VolumeConvention.LEG1_IN
) -> List[DailyAggregate]:
    """leg1 시각의 UTC 날짜별 건수, 거래량, 평균 수수료 (평가된 매치 기준)"""
    days: Dict[str, List[AccountedMatch]] = defaultdict(list)
    for row in rows:
        days[utc_date(row.match.leg1.timestamp)].append(row)
    out: List[DailyAggregate] = []
    for day, items in sorted(days.items()):
        priced = [r.profit for r in items if r.profit.priced]
        fees = _fsum_opt(p.costs_usd for p in priced)
        per_entity: Dict[str, int] = defaultdict(int)
        per_chain: Dict[str, int] = defaultdict(int)
        for r in items:
            per_entity[r.match.entity] += 1
            per_chain[r.chain_pair] += 1
        out.append(
            DailyAggregate(
                date=day,
                trade_count=len(items),
                priced_count=len(priced),
                volume_usd=_fsum_opt(p.volume(convention) for p in priced),
                fee_usd=fees,
                mean_fee_usd=fees / len(priced) if priced else None,
                per_entity=dict(sorted(per_entity.items())),
                per_chain=dict(sorted(per_chain.items())),
            )
        )
    return out


def split_test(daily: Sequence[DailyAggregate], split_date: str) -> Dict[str, WelchResult]:
    """
    split_date 전(미포함)과 후(포함)의 일별 평균 수수료 / 건수 / 거래량 Welch 비교.
    평균 수수료가 없는 날은 수수료 비교에서만 빠진다.
    """
    before = [d for d in daily if d.date < split_date]
    after = [d for d in daily if d.date >= split_date]
    metrics: Dict[str, Callable[[DailyAggregate], Optional[float]]] = {
        "mean_fee_usd": lambda d: d.mean_fee_usd,
        "trade_count": lambda d: float(d.trade_count),
        "volume_usd": lambda d: d.volume_usd,
    }
    return {name: welch_test(_present(f, before), _present(f, after)) for name, f in metrics.items()}


def _present(metric: Callable[[DailyAggregate], Optional[float]], days: Sequence[DailyAggregate]) -> List[float]:
    return [v for v in map(metric, days) if v is not None]


# =============================================================================
# 요약
# =============================================================================
@dataclass
class AccountingSummary:
    matches: int = 0
    priced: int = 0
    unpriced: int = 0
    revenue_usd: float = 0.0
    costs_usd: float = 0.0
    net_profit_usd: float = 0.0
    volume_usd: float = 0.0
    methods: Dict[str, int] = field(default_factory=lambda: dict[str, int]())
    settlement: Dict[str, Percentiles] = field(default_factory=lambda: dict[str, Percentiles]())
    windows: Dict[str, Dict[str, float]] = field(default_factory=lambda: dict[str, Dict[str, float]]())
    bridge_costs: List[BridgeCostStats] = field(default_factory=lambda: list[BridgeCostStats]())
    convention: VolumeConvention = VolumeConvention.LEG1_IN

    def to_dict(self) -> Dict[str, Any]:
        return {
            "matches": self.matches,
            "priced": self.priced,
            "unpriced": self.unpriced,
            "revenue_usd": self.revenue_usd,
            "costs_usd": self.costs_usd,
            "net_profit_usd": self.net_profit_usd,
            "volume_usd": self.volume_usd,
            "volume_convention": self.convention.value,
            "methods": self.methods,
            "settlement_seconds": {m: p.to_dict() for m, p in self.settlement.items()},
            "settlement_window_shares": self.windows,
            "bridge_costs": [
                {
                    "method": b.method,
                    "count": b.count,
                    "mean_latency_seconds": b.mean_latency_seconds,
                    "mean_bridge_fee_usd": b.mean_bridge_fee_usd,
                    "bridge_fee_ratio": b.bridge_fee_ratio,
                }
                for b in self.bridge_costs
            ],
        }


def summarize(rows: Sequence[AccountedMatch], convention: VolumeConvention = VolumeConvention.LEG1_IN) -> AccountingSummary:
    priced = [r.profit for r in rows if r.profit.priced]
    methods: Dict[str, int] = {m.value: 0 for m in ExecutionMethod}
    for r in rows:
        methods[r.method] += 1
    return AccountingSummary(
        matches=len(rows),
        priced=len(priced),
        unpriced=len(rows) - len(priced),
        revenue_usd=_fsum_opt(p.revenue_usd for p in priced),
        costs_usd=_fsum_opt(p.costs_usd for p in priced),
        net_profit_usd=_fsum_opt(p.net_profit_usd for p in priced),
        volume_usd=_fsum_opt(p.volume(convention) for p in priced),
        methods=methods,
        settlement=settlement_stats(rows) if rows else {},
        windows=window_shares(rows) if rows else {},
        bridge_costs=bridge_cost_stats(rows),
        convention=convention,
    )


# =============================================================================
# CSV 표
# =============================================================================
DAILY_HEADER = ("date", "count", "volume_usd", "mean_fee_usd")
PAIR_HEADER = (
    "chain_pair", "count", "priced", "total_profit_usd", "avg_profit_usd", "total_volume_usd",
    "avg_volume_usd", "inventory_share", "native_share", "multichain_share",
    "settlement_p25", "settlement_p50", "settlement_p75",
)
ENTITY_HEADER = (
    "entity", "type", "count", "priced", "total_profit_usd", "avg_profit_usd", "total_volume_usd",
    "avg_volume_usd", "inventory_share", "bridge_share", "settlement_p25", "settlement_p50", "settlement_p75",
)
CDF_HEADER = ("metric", "rank", "key", "value", "cumulative_share")


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def daily_table(daily: Sequence[DailyAggregate]) -> List[List[str]]:
    return [list(DAILY_HEADER)] + [
        [d.date, str(d.trade_count), _fmt(d.volume_usd), _fmt(d.mean_fee_usd)] for d in daily
    ]


def pair_table(stats: Sequence[GroupStats]) -> List[List[str]]:
    rows = [list(PAIR_HEADER)]
    for s in stats:
        rows.append(
            [
                s.key, str(s.count), str(s.priced), _fmt(s.total_profit_usd), _fmt(s.avg_profit_usd),
                _fmt(s.total_volume_usd), _fmt(s.avg_volume_usd),
                _fmt(s.method_shares[ExecutionMethod.INVENTORY.value]),
                _fmt(s.method_shares[ExecutionMethod.NATIVE_BRIDGE.value]),
                _fmt(s.method_shares[ExecutionMethod.MULTICHAIN_BRIDGE.value]),
                _fmt(s.settlement.p25), _fmt(s.settlement.p50), _fmt(s.settlement.p75),
            ]
        )
    return rows


def entity_table(stats: Sequence[GroupStats]) -> List[List[str]]:
    rows = [list(ENTITY_HEADER)]
    for s in stats:
        rows.append(
            [
                s.key, s.kind or "", str(s.count), str(s.priced), _fmt(s.total_profit_usd), _fmt(s.avg_profit_usd),
                _fmt(s.total_volume_usd), _fmt(s.avg_volume_usd),
                _fmt(s.method_shares[ExecutionMethod.INVENTORY.value]), _fmt(s.bridge_share),
                _fmt(s.settlement.p25), _fmt(s.settlement.p50), _fmt(s.settlement.p75),
            ]
        )
    return rows


def cdf_table(count_cdf: Sequence[CdfPoint], volume_cdf: Sequence[CdfPoint]) -> List[List[str]]:
    rows = [list(CDF_HEADER)]
    for metric, points in (("count", count_cdf), ("volume", volume_cdf)):
        rows.extend([metric, str(p.rank), p.key, _fmt(p.value), _fmt(p.cumulative_share)] for p in points)
    return rows
