# tests/test_accounting.py
import random
from decimal import Decimal

import pytest

from core.exceptions import ConfigError
from domain.accounting import (
    AccountedMatch,
    Percentiles,
    PricingContext,
    ProfitBreakdown,
    VolumeConvention,
    account,
    bridge_cost_stats,
    concentration_cdf,
    daily_aggregates,
    daily_table,
    entity_stats,
    nearest_rank,
    pair_stats,
    price_match,
    settlement_stats,
    split_test,
    summarize,
    window_shares,
)
from domain.bridgelink import INVENTORY, BridgeTx, ClassifiedMatch, ExecutionClass, ExecutionMethod
from domain.chaindata import ChainDirectory, ChainInfo, PriceTable
from domain.detector import ArbMatch, PairClass
from services.statistics_service import StatisticsService
from utilities.file_handler import save_csv

DAY = 86_400
T0 = 1_700_006_400  # 2023-11-15 00:00 UTC
HOUR = T0 // 3600


def make_match(leg1, leg2, entity=None):
    return ArbMatch(
        leg1, leg2, Decimal(0), leg2.timestamp - leg1.timestamp, PairClass.OTHER,
        entity or leg1.originator, 1, 0,
    )


def ctx_with(registry, prices, chains):
    table = PriceTable()
    for cls, usd in prices.items():
        table.add(cls, HOUR, usd)
    return PricingContext(table, registry, chains)


# =============================================================================
# 사례 계산
# =============================================================================
def test_stablecoin_round_trip_fixture(make_swap, registry, chains):
    leg1 = make_swap("eth", "0xa1", T0 + 10, "USD", "OMNI", "20000", "5000", gas_fee_native=Decimal("0.1"))
    leg2 = make_swap(
        "arb", "0xb1", T0 + 70, "OMNI", "USD", "5000", "134889.18", gas_fee_native=Decimal("0.0004")
    )
    ctx = ctx_with(registry, {"USD": 1.0, "ETH": 2000.0}, chains)
    profit = price_match(make_match(leg1, leg2), ctx)
    assert profit.priced
    assert profit.usd_in_leg1 == pytest.approx(20000.0)
    assert profit.usd_out_leg2 == pytest.approx(134889.18)
    assert profit.costs_usd == pytest.approx(200.80)
    assert profit.net_profit_usd == pytest.approx(114688.38)


def test_native_token_round_trip_fixture(make_swap, registry):
    chains = ChainDirectory([ChainInfo("eth", "L1", 12, "ETH"), ChainInfo("arb", "L2", 1, "GAS")])
    leg1 = make_swap(
        "eth", "0xa1", T0 + 100, "ETH", "OMNI", "0.9", "4000",
        gas_fee_native=Decimal("0.0012"), coinbase_tip_native=Decimal("0.0002"),
    )
    leg2 = make_swap("arb", "0xb1", T0 + 127, "OMNI", "ETH", "4000", "0.99", gas_fee_native=Decimal("0.4"))
    ctx = ctx_with(registry, {"ETH": 2250.0, "GAS": 1.0}, chains)
    match = make_match(leg1, leg2)
    profit = price_match(match, ctx)
    assert profit.revenue_usd == pytest.approx(202.5)
    assert profit.gas_fees_usd == pytest.approx(3.10)
    assert profit.coinbase_tips_usd == pytest.approx(0.45)
    assert profit.costs_usd == pytest.approx(3.55)
    assert profit.net_profit_usd == pytest.approx(198.95)
    assert match.settlement_seconds == 27


def test_bridge_fee_priced_on_departure_chain(make_swap, registry, chains):
    leg1 = make_swap("eth", "0xa1", T0 + 10, "USD", "ETH", "2000", "1")
    leg2 = make_swap("arb", "0xb1", T0 + 700, "ETH", "USD", "1", "2100")
    execution = ExecutionClass(
        ExecutionMethod.NATIVE_BRIDGE,
        bridge_out=BridgeTx("eth", "0xl1", T0 + 20),
        bridge_in=BridgeTx("arb", "0xl2", T0 + 650),
        bridge_latency_seconds=630,
        bridge_fee_native=Decimal("0.001"),
    )
    ctx = ctx_with(registry, {"USD": 1.0, "ETH": 2000.0}, chains)
    profit = price_match(make_match(leg1, leg2), ctx, execution)
    assert profit.bridge_fees_usd == pytest.approx(2.0)
    assert profit.revenue_usd - profit.costs_usd == pytest.approx(profit.net_profit_usd)


def test_missing_price_leaves_match_unpriced(make_swap, registry, chains):
    leg1 = make_swap("eth", "0xa1", T0 + 10, "USD", "OMNI", "100", "50")
    leg2 = make_swap("arb", "0xb1", T0 + 20, "OMNI", "USD", "50", "101")
    ctx = ctx_with(registry, {"USD": 1.0}, chains)
    profit = price_match(make_match(leg1, leg2), ctx)
    assert not profit.priced
    assert profit.net_profit_usd is None
    assert profit.costs_usd is None
    assert any("ETH" in reason for reason in profit.missing)


def test_volume_conventions():
    profit = ProfitBreakdown(priced=True, usd_in_leg1=100.0, usd_out_leg2=110.0)
    assert profit.volume() == 100.0
    assert profit.volume(VolumeConvention.LEG2_OUT) == 110.0
    assert profit.volume(VolumeConvention.MEAN) == 105.0


# =============================================================================
# 백분위수 / 정산 시간
# =============================================================================
def test_nearest_rank_percentiles():
    p = Percentiles.of(list(range(1, 101)))
    assert (p.p25, p.p50, p.p75) == (25, 50, 75)
    single = Percentiles.of([9])
    assert (single.p25, single.p50, single.p75) == (9, 9, 9)
    with pytest.raises(ValueError):
        nearest_rank([], 50)


def accounted(make_swap, i, entity, settlement, method=INVENTORY, t1=T0, usd_in=None, gas=0.5):
    leg1 = make_swap("eth", f"0xa{i:04d}", t1, "USD", "OMNI", "1", "1", originator=entity)
    leg2 = make_swap("arb", f"0xb{i:04d}", t1 + settlement, "OMNI", "USD", "1", "1", originator=entity)
    if usd_in is None:
        profit = ProfitBreakdown(priced=False)
    else:
        profit = ProfitBreakdown(
            priced=True, usd_in_leg1=usd_in, usd_out_leg2=usd_in + 1.0, gas_fees_usd=gas,
            coinbase_tips_usd=0.0, bridge_fees_usd=0.0, revenue_usd=1.0, net_profit_usd=1.0 - gas,
        )
    return AccountedMatch(make_match(leg1, leg2), method, profit)


def bridge(latency):
    return ExecutionClass(
        ExecutionMethod.MULTICHAIN_BRIDGE,
        bridge_out=BridgeTx("eth", "0xo", T0),
        bridge_in=BridgeTx("arb", "0xi", T0 + latency),
        bridge_latency_seconds=latency,
        bridge_fee_native=Decimal(0),
    )


def test_settlement_stats_by_method(make_swap):
    rows = [accounted(make_swap, i, "0xe1", gap) for i, gap in enumerate(range(1, 101))]
    rows.append(accounted(make_swap, 200, "0xe2", 900, method=bridge(800)))
    stats = settlement_stats(rows)
    assert set(stats) == {"All", "Inventory", "MultichainBridge"}
    assert (stats["Inventory"].p25, stats["Inventory"].p50, stats["Inventory"].p75) == (25, 50, 75)
    assert stats["MultichainBridge"].p50 == 900
    assert stats["All"].n == 101


def test_window_shares(make_swap):
    rows = [accounted(make_swap, i, "0xe1", gap) for i, gap in enumerate((100, 700, 2000, 500))]
    shares = window_shares(rows)
    assert shares["Inventory"] == {"le_600s": 0.5, "le_1800s": 0.75}


# =============================================================================
# 집중도 / 그룹
# =============================================================================
def test_count_concentration(make_swap):
    rows = [accounted(make_swap, i, "0xbig" if i < 75 else "0xsmall", 10) for i in range(100)]
    cdf = concentration_cdf(rows)
    assert [p.key for p in cdf] == ["0xbig", "0xsmall"]
    assert [p.cumulative_share for p in cdf] == [0.75, 1.0]


def test_single_entity_concentration(make_swap):
    cdf = concentration_cdf([accounted(make_swap, 0, "0xonly", 10)])
    assert [p.cumulative_share for p in cdf] == [1.0]


def test_volume_concentration_skips_unpriced(make_swap):
    rows = [
        accounted(make_swap, 0, "0xa", 10, usd_in=300.0),
        accounted(make_swap, 1, "0xb", 10, usd_in=100.0),
        accounted(make_swap, 2, "0xc", 10),
    ]
    cdf = concentration_cdf(rows, by="volume")
    assert [(p.key, p.cumulative_share) for p in cdf] == [("0xa", 0.75), ("0xb", 1.0)]


def test_concentration_rejects_unknown_metric(make_swap):
    with pytest.raises(ConfigError):
        concentration_cdf([], by="profit")


def test_pair_and_entity_stats(make_swap):
    rows = [
        accounted(make_swap, 0, "0xe1", 10, usd_in=100.0),
        accounted(make_swap, 1, "0xe1", 20, usd_in=300.0),
        accounted(make_swap, 2, "0xe2", 30, method=bridge(20), usd_in=50.0),
    ]
    [pair] = pair_stats(rows)
    assert pair.key == "arb-eth"
    assert pair.count == 3
    assert pair.total_volume_usd == pytest.approx(450.0)
    assert pair.method_shares["MultichainBridge"] == pytest.approx(1 / 3)

    by_entity = entity_stats(rows)
    assert [s.key for s in by_entity] == ["0xe1", "0xe2"]
    assert by_entity[0].kind == "EOA"
    assert by_entity[0].avg_profit_usd == pytest.approx(0.5)
    assert by_entity[1].bridge_share == pytest.approx(1.0)


def test_bridge_cost_stats(make_swap):
    rows = [
        accounted(make_swap, 0, "0xe1", 300, method=bridge(200), usd_in=100.0),
        accounted(make_swap, 1, "0xe1", 300, method=bridge(100), usd_in=100.0),
        accounted(make_swap, 2, "0xe1", 10, usd_in=100.0),
    ]
    [stats] = bridge_cost_stats(rows)
    assert stats.method == "MultichainBridge"
    assert stats.count == 2
    assert stats.mean_latency_seconds == 150.0
    assert stats.bridge_fee_ratio == 0.0


# =============================================================================
# 일별 / 요약
# =============================================================================
def test_daily_aggregates_and_split(make_swap):
    rows = []
    i = 0
    for day in range(8):
        n = (2 + day % 2) if day < 4 else (6 + day % 2)
        for _ in range(n):
            rows.append(
                accounted(make_swap, i, "0xe1", 10, t1=T0 + day * DAY + 60, usd_in=100.0, gas=0.5 + 0.1 * (day % 3))
            )
            i += 1
    daily = daily_aggregates(rows)
    assert [d.date for d in daily][:2] == ["2023-11-15", "2023-11-16"]
    assert [d.trade_count for d in daily] == [2, 3, 2, 3, 6, 7, 6, 7]
    assert daily[0].mean_fee_usd == pytest.approx(0.5)
    assert daily[0].per_chain == {"arb-eth": 2}

    result = split_test(daily, "2023-11-19")
    assert set(result) == {"mean_fee_usd", "trade_count", "volume_usd"}
    assert result["trade_count"].delta == pytest.approx(4.0)
    assert result["trade_count"].t < 0


def unpriced_day_rows(make_swap):
    rows = []
    for day in range(6):
        for k in range(2 + day % 2):
            rows.append(
                accounted(
                    make_swap, day * 10 + k, "0xe1", 10, t1=T0 + day * DAY + 60,
                    usd_in=None if day == 4 else 100.0, gas=0.5 + 0.1 * k + 0.05 * day,
                )
            )
    return rows


def test_day_without_priced_matches_has_no_mean_fee(make_swap):
    daily = daily_aggregates(unpriced_day_rows(make_swap))
    assert daily[4].trade_count == 2
    assert daily[4].priced_count == 0
    assert daily[4].mean_fee_usd is None
    assert daily_table(daily)[5] == ["2023-11-19", "2", "0.0", ""]

    result = split_test(daily, "2023-11-18")
    assert (result["trade_count"].n_a, result["trade_count"].n_b) == (3, 3)
    # 수수료 비교에서만 빠진다
    assert (result["mean_fee_usd"].n_a, result["mean_fee_usd"].n_b) == (3, 2)
    assert result["mean_fee_usd"].mean_b == pytest.approx(0.8)


def test_split_reads_empty_mean_fee_cells(make_swap, tmp_path):
    daily = daily_aggregates(unpriced_day_rows(make_swap))
    path = tmp_path / "daily.csv"
    save_csv(path, daily_table(daily))
    result = StatisticsService().split(path, "2023-11-18")
    assert result["mean_fee_usd"].n_b == 2
    assert result["mean_fee_usd"].mean_b == pytest.approx(0.8)
    assert result["trade_count"].n_b == 3


def test_summary_identity(make_swap, registry, chains):
    leg1 = make_swap("eth", "0xa1", T0 + 10, "USD", "OMNI", "20000", "5000", gas_fee_native=Decimal("0.1"))
    leg2 = make_swap("arb", "0xb1", T0 + 70, "OMNI", "USD", "5000", "20100", gas_fee_native=Decimal("0.0004"))
    ctx = ctx_with(registry, {"USD": 1.0, "ETH": 2000.0}, chains)
    rows = account([ClassifiedMatch(make_match(leg1, leg2), INVENTORY)], ctx)
    summary = summarize(rows)
    assert summary.priced == 1
    assert summary.unpriced == 0
    assert summary.revenue_usd - summary.costs_usd == pytest.approx(summary.net_profit_usd)
    assert summary.methods == {"Inventory": 1, "NativeBridge": 0, "MultichainBridge": 0}
    assert summary.to_dict()["settlement_seconds"]["All"]["p50"] == 60


def test_summary_of_nothing():
    summary = summarize([])
    assert summary.matches == 0
    assert summary.settlement == {}


# =============================================================================
# 분할 / 순서 불변
# =============================================================================
def mixed_rows(make_swap, n=60, seed=11):
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        method = bridge(rng.randint(30, 900)) if rng.random() < 0.3 else INVENTORY
        rows.append(
            accounted(
                make_swap, i, f"0xe{rng.randint(1, 6)}", rng.randint(5, 4000), method=method,
                t1=T0 + rng.randint(0, 5) * DAY + rng.randint(0, 3600),
                usd_in=None if rng.random() < 0.2 else rng.uniform(10.0, 5000.0),
                gas=rng.uniform(0.01, 3.0),
            )
        )
    return rows


def test_totals_add_up_over_a_partition(make_swap):
    rows = mixed_rows(make_swap)
    parts = [rows[:17], rows[17:40], rows[40:]]
    whole = summarize(rows)
    pieces = [summarize(p) for p in parts]

    assert whole.matches == sum(s.matches for s in pieces)
    assert whole.priced == sum(s.priced for s in pieces)
    assert whole.unpriced == sum(s.unpriced for s in pieces)
    for method, count in whole.methods.items():
        assert count == sum(s.methods[method] for s in pieces)
    for attr in ("revenue_usd", "costs_usd", "net_profit_usd", "volume_usd"):
        assert getattr(whole, attr) == pytest.approx(sum(getattr(s, attr) for s in pieces))

    by_entity = {s.key: s for s in entity_stats(rows)}
    part_stats = [{s.key: s for s in entity_stats(p)} for p in parts]
    for key, s in by_entity.items():
        assert s.count == sum(ps[key].count for ps in part_stats if key in ps)
        assert s.total_volume_usd == pytest.approx(sum(ps[key].total_volume_usd for ps in part_stats if key in ps))

    days = {d.date: d for d in daily_aggregates(rows)}
    part_days = [{d.date: d for d in daily_aggregates(p)} for p in parts]
    for date, d in days.items():
        assert d.trade_count == sum(pd[date].trade_count for pd in part_days if date in pd)
        assert d.fee_usd == pytest.approx(sum(pd[date].fee_usd for pd in part_days if date in pd))


def test_aggregates_ignore_row_order(make_swap):
    rows = mixed_rows(make_swap)
    expected = (
        settlement_stats(rows),
        window_shares(rows),
        concentration_cdf(rows),
        concentration_cdf(rows, by="volume"),
        pair_stats(rows),
        entity_stats(rows),
        daily_aggregates(rows),
        summarize(rows),
    )
    rng = random.Random(5)
    for _ in range(5):
        shuffled = rows[:]
        rng.shuffle(shuffled)
        assert (
            settlement_stats(shuffled),
            window_shares(shuffled),
            concentration_cdf(shuffled),
            concentration_cdf(shuffled, by="volume"),
            pair_stats(shuffled),
            entity_stats(shuffled),
            daily_aggregates(shuffled),
            summarize(shuffled),
        ) == expected
