# services/accounting_service.py
"""
[회계 서비스]

matches.jsonl + 가격표 → 매치별 USD 이익, 일별/체인 쌍/엔티티 집계, 집중도 CDF.

출력 파일 (out_dir 아래):
    report.json     요약 (합계, 미평가 건수, 정산 시간, 브릿지 비용, 선택적 전후 비교)
    profits.csv     매치별 이익 내역
    daily.csv       date, count, volume_usd, mean_fee_usd
    pairs.csv       체인 쌍별 통계
    entities.csv    엔티티별 통계
    cdf.csv         엔티티 집중도 (건수 / 거래량)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from core.events.interfaces import EventBusLike
from core.exceptions import DegenerateSampleError
from domain import chaindata
from domain.accounting import (
    AccountedMatch,
    AccountingSummary,
    DailyAggregate,
    PricingContext,
    VolumeConvention,
    account,
    cdf_table,
    concentration_cdf,
    daily_aggregates,
    daily_table,
    entity_stats,
    entity_table,
    pair_stats,
    pair_table,
    split_test,
    summarize,
)
from domain.bridgelink import ClassifiedMatch, load_matches
from domain.chaindata import ChainDirectory, LoadReport
from services.base_service import BaseService
from services.statistics_service import welch_to_dict
from utilities.file_handler import save_csv, save_json

REPORT_FILE = "report.json"
PROFITS_FILE = "profits.csv"
DAILY_FILE = "daily.csv"
PAIRS_FILE = "pairs.csv"
ENTITIES_FILE = "entities.csv"
CDF_FILE = "cdf.csv"

PROFITS_HEADER = (
    "leg1_chain", "leg1_tx", "leg2_chain", "leg2_tx", "entity", "method", "priced",
    "usd_in_leg1", "usd_out_leg2", "revenue_usd", "gas_fees_usd", "coinbase_tips_usd",
    "bridge_fees_usd", "net_profit_usd", "settlement_seconds", "missing",
)


def _opt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


@dataclass(frozen=True)
class AccountingInputs:
    matches: Path
    prices: Path
    equivalence: Path
    chains: Optional[Path] = None

    def paths(self) -> List[Path]:
        return [p for p in (self.matches, self.prices, self.equivalence, self.chains) if p is not None]


@dataclass
class AccountingResult:
    rows: List[AccountedMatch]
    summary: AccountingSummary
    daily: List[DailyAggregate]
    load_reports: List[LoadReport] = field(default_factory=lambda: list[LoadReport]())
    split: Optional[Dict[str, Any]] = None


class AccountingService(BaseService):
    def __init__(
        self,
        bus: Optional[EventBusLike] = None,
        threads: int = 1,
        strict: bool = False,
        convention: VolumeConvention = VolumeConvention.LEG1_IN,
    ):
        super().__init__(bus, threads)
        self.strict = strict
        self.convention = convention

    def load_classified(self, path: Path, reports: Optional[List[LoadReport]] = None) -> List[ClassifiedMatch]:
        self.stage_started("load_matches")
        rep = LoadReport("matches")
        classified = list(load_matches(path, self.strict, rep))
        if reports is not None:
            reports.append(rep)
        self.records_skipped("load_matches", "schema", rep.skipped)
        self.stage_finished("load_matches", rep.records)
        return classified

    def run(self, inputs: AccountingInputs, split_date: Optional[str] = None) -> AccountingResult:
        reports: List[LoadReport] = []
        classified = self.load_classified(inputs.matches, reports)

        price_rep, eq_rep = LoadReport("prices"), LoadReport("equivalence")
        prices = chaindata.load_prices(inputs.prices, self.strict, price_rep)
        registry = chaindata.load_equivalence(inputs.equivalence, self.strict, eq_rep)
        reports += [price_rep, eq_rep]
        chains = ChainDirectory()
        if inputs.chains is not None:
            chain_rep = LoadReport("chains")
            chains = chaindata.load_chains(inputs.chains, self.strict, chain_rep)
            reports.append(chain_rep)
        else:
            self.log_warning("체인 목록이 없어 가스/브릿지 수수료를 평가할 수 없다 (해당 매치는 미평가)")

        self.stage_started("account")
        rows = account(classified, PricingContext(prices, registry, chains))
        summary = summarize(rows, self.convention)
        daily = daily_aggregates(rows, self.convention)
        self.records_skipped("account", "missing_price", summary.unpriced)
        self.stage_finished("account", summary.priced)
        self.log_info(
            f"매치 {summary.matches}건 (평가 {summary.priced}, 미평가 {summary.unpriced}), "
            f"순이익 합계 {summary.net_profit_usd:.2f} USD"
        )

        split = None
        if split_date is not None:
            split = self._split(daily, split_date)
        return AccountingResult(rows, summary, daily, reports, split)

    def _split(self, daily: Sequence[DailyAggregate], split_date: str) -> Dict[str, Any]:
        try:
            results = split_test(daily, split_date)
        except DegenerateSampleError as e:
            self.log_warning(f"전후 비교 불가 ({split_date}): {e}")
            return {"split_date": split_date, "error": str(e)}
        return {"split_date": split_date, **{name: welch_to_dict(r) for name, r in results.items()}}

    # ==========================================================
    # 쓰기
    # ==========================================================
    def write(self, out_dir: Path, result: AccountingResult) -> List[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = result.rows

        report = result.summary.to_dict()
        report["inputs"] = [r.to_dict() for r in result.load_reports]
        report["unpriced_matches"] = [
            {
                "leg1": f"{r.match.leg1.chain}:{r.match.leg1.tx_hash}",
                "leg2": f"{r.match.leg2.chain}:{r.match.leg2.tx_hash}",
                "missing": list(r.profit.missing),
            }
            for r in rows
            if not r.profit.priced
        ]
        if result.split is not None:
            report["split_test"] = result.split

        count_cdf = concentration_cdf(rows, by="count", convention=self.convention)
        volume_cdf = concentration_cdf(rows, by="volume", convention=self.convention)

        outputs = {
            REPORT_FILE: None,
            PROFITS_FILE: self._profit_rows(rows),
            DAILY_FILE: daily_table(result.daily),
            PAIRS_FILE: pair_table(pair_stats(rows, self.convention)),
            ENTITIES_FILE: entity_table(entity_stats(rows, self.convention)),
            CDF_FILE: cdf_table(count_cdf, volume_cdf),
        }
        paths: List[Path] = []
        for name, table in outputs.items():
            path = out_dir / name
            if table is None:
                save_json(path, report)
            else:
                save_csv(path, table)
            paths.append(path)
        self.log_info(f"회계 결과 {len(paths)}개 파일 저장: {out_dir}")
        return paths

    @staticmethod
    def _profit_rows(rows: Sequence[AccountedMatch]) -> List[List[str]]:
        table = [list(PROFITS_HEADER)]
        for r in rows:
            p, m = r.profit, r.match
            table.append(
                [
                    m.leg1.chain, m.leg1.tx_hash, m.leg2.chain, m.leg2.tx_hash, m.entity, r.method,
                    "true" if p.priced else "false",
                    _opt(p.usd_in_leg1), _opt(p.usd_out_leg2), _opt(p.revenue_usd), _opt(p.gas_fees_usd),
                    _opt(p.coinbase_tips_usd), _opt(p.bridge_fees_usd), _opt(p.net_profit_usd),
                    str(r.settlement), "; ".join(p.missing),
                ]
            )
        return table
