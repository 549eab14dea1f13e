# services/statistics_service.py
"""
[통계 서비스]

CSV 열 위의 Welch 검정 / Pearson 상관, 가격표의 일별 변동성, daily.csv 전후 비교.
빈 칸은 값이 없는 것으로 보고 건너뛴다.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from core.events.interfaces import EventBusLike
from core.exceptions import DataError
from domain import chaindata
from domain.accounting import DailyAggregate, split_test
from domain.chaindata import HOUR
from domain.statistics import PearsonResult, WelchResult, daily_volatility, pearson, welch_test
from services.base_service import BaseService
from utilities.file_handler import load_csv, save_csv


def welch_to_dict(r: WelchResult) -> Dict[str, Any]:
    return {
        "t": r.t,
        "df": r.df,
        "p_two_sided": r.p_two_sided,
        "cohen_d": r.cohen_d,
        "delta": r.delta,
        "ci95": list(r.ci95),
        "n_a": r.n_a,
        "n_b": r.n_b,
        "mean_a": r.mean_a,
        "mean_b": r.mean_b,
    }


def pearson_to_dict(r: PearsonResult) -> Dict[str, Any]:
    return {"r": r.r, "p": r.p, "n": r.n}


class CsvTable:
    """헤더가 있는 CSV. '#'로 시작하는 줄은 load_csv가 건너뛴다."""

    def __init__(self, path: Path):
        rows = load_csv(path)
        if not rows:
            raise DataError(f"{path}: empty CSV")
        self.path = path
        self.header = [h.strip() for h in rows[0]]
        self.rows = rows[1:]

    def index(self, column: str) -> int:
        try:
            return self.header.index(column)
        except ValueError:
            raise DataError(f"{self.path}: no column {column!r} (have {', '.join(self.header)})") from None

    def cell(self, row: Sequence[str], i: int) -> Optional[str]:
        value = row[i].strip() if i < len(row) else ""
        return value or None

    def floats(self, column: str) -> List[float]:
        i = self.index(column)
        return [_to_float(self.path, v) for row in self.rows if (v := self.cell(row, i)) is not None]

    def float_pairs(self, x: str, y: str) -> Tuple[List[float], List[float]]:
        ix, iy = self.index(x), self.index(y)
        xs: List[float] = []
        ys: List[float] = []
        for row in self.rows:
            vx, vy = self.cell(row, ix), self.cell(row, iy)
            if vx is None or vy is None:
                continue
            xs.append(_to_float(self.path, vx))
            ys.append(_to_float(self.path, vy))
        return xs, ys


def _to_float(path: Path, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}: not a number: {text!r}") from None


class StatisticsService(BaseService):
    def __init__(self, bus: Optional[EventBusLike] = None, threads: int = 1):
        super().__init__(bus, threads)

    def welch(self, path_a: Path, column_a: str, path_b: Path, column_b: str) -> WelchResult:
        a = CsvTable(path_a).floats(column_a)
        b = CsvTable(path_b).floats(column_b)
        result = welch_test(a, b)
        self.log_info(f"Welch: t={result.t:.4f}, df={result.df:.2f}, p={result.p_two_sided:.4g}")
        return result

    def pearson(self, path: Path, x: str, y: str) -> PearsonResult:
        xs, ys = CsvTable(path).float_pairs(x, y)
        result = pearson(xs, ys)
        self.log_info(f"Pearson: r={result.r:.4f}, p={result.p:.4g}, n={result.n}")
        return result

    def volatility(self, prices_path: Path, cls: str) -> Dict[str, float]:
        """가격표의 한 클래스에 대한 UTC 날짜별 ln(고가/저가)"""
        table = chaindata.load_prices(prices_path, strict=True)
        samples = [(hour * HOUR, usd) for c, hour, usd in table.rows() if c == cls]
        if not samples:
            raise DataError(f"{prices_path}: no prices for class {cls!r}")
        return daily_volatility(samples)

    def volatility_vs_daily(self, volatility: Dict[str, float], daily_path: Path, column: str = "count") -> PearsonResult:
        """일별 변동성과 daily.csv 열의 상관 (두 쪽에 모두 있는 날짜만)"""
        table = CsvTable(daily_path)
        i_date, i_val = table.index("date"), table.index(column)
        xs: List[float] = []
        ys: List[float] = []
        for row in table.rows:
            day, value = table.cell(row, i_date), table.cell(row, i_val)
            if day is None or value is None or day not in volatility:
                continue
            xs.append(volatility[day])
            ys.append(_to_float(daily_path, value))
        return pearson(xs, ys)

    def split(self, daily_path: Path, split_date: str) -> Dict[str, WelchResult]:
        table = CsvTable(daily_path)
        i_date, i_count = table.index("date"), table.index("count")
        i_vol, i_fee = table.index("volume_usd"), table.index("mean_fee_usd")
        daily: List[DailyAggregate] = []
        for row in table.rows:
            day = table.cell(row, i_date)
            if day is None:
                continue
            count = int(_to_float(daily_path, table.cell(row, i_count) or "0"))
            fee_cell = table.cell(row, i_fee)
            mean_fee = _to_float(daily_path, fee_cell) if fee_cell is not None else None
            daily.append(
                DailyAggregate(
                    date=day,
                    trade_count=count,
                    priced_count=count,
                    volume_usd=_to_float(daily_path, table.cell(row, i_vol) or "0"),
                    fee_usd=mean_fee * count if mean_fee is not None else 0.0,
                    mean_fee_usd=mean_fee,
                )
            )
        return split_test(daily, split_date)

    def write_volatility(self, path: Path, volatility: Dict[str, float]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_csv(path, [["date", "volatility"]] + [[d, repr(v)] for d, v in sorted(volatility.items())])
        return path
