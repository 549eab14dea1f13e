# domain/chaindata.py
"""
[체인 데이터 모델과 파일 입출력]

탐지기가 읽는 모든 입력의 정규화된 형태와 JSONL/CSV 형식을 정의한다.

형식 규칙
    - JSONL: UTF-8, 한 줄에 레코드 하나. 첫 줄은 버전 헤더
      {"schema": "<종류>", "schema_version": 1} (없으면 버전 1로 간주)
    - CSV: 첫 줄 "# schema_version=1", 그다음 열 이름 행
    - 토큰 수량은 10진 문자열(Decimal), USD만 float
    - 주소/해시는 읽을 때 소문자로 맞춘다

읽기 모드
    strict=True   잘못된 줄을 만나면 SchemaViolationError (줄 번호 포함)
    strict=False  건너뛰고 LoadReport에 사유와 줄 번호를 센다
"""
from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    TypeVar,
)

from core.exceptions import AmbiguousEndpointsError, DataError, SchemaViolationError
from utilities.file_handler import iter_lines, save_csv, save_jsonl

SCHEMA_VERSION = 1
SUPPORTED_VERSIONS = frozenset({1})
HOUR = 3600
MAX_STORED_ERRORS = 100

T = TypeVar("T")
TxKey = Tuple[str, str]


# =============================================================================
# 레코드
# =============================================================================
@dataclass(frozen=True)
class SwapRecord:
    chain: str
    tx_hash: str
    block: int
    timestamp: int
    originator: str
    first_contact: Optional[str]
    asset_in: str
    asset_out: str
    amount_in: Decimal
    amount_out: Decimal
    gas_fee_native: Decimal
    coinbase_tip_native: Decimal
    recipient: Optional[str] = None

    @property
    def key(self) -> TxKey:
        return (self.chain, self.tx_hash)

    @property
    def receiver(self) -> str:
        """스왑 결과 토큰을 받은 주소 (recipient가 없으면 originator)"""
        return self.recipient or self.originator


@dataclass(frozen=True)
class RawSwapEvent:
    """집계 전, 트랜잭션 안의 스왑 이벤트 하나 (홉 단위)"""

    chain: str
    tx_hash: str
    log_index: int
    block: int
    timestamp: int
    originator: str
    first_contact: Optional[str]
    asset_in: str
    asset_out: str
    amount_in: Decimal
    amount_out: Decimal
    gas_fee_native: Decimal
    coinbase_tip_native: Decimal
    recipient: Optional[str] = None


@dataclass(frozen=True)
class TransferRecord:
    chain: str
    tx_hash: str
    log_index: int
    block: int
    timestamp: int
    token: str
    from_addr: str
    to_addr: str
    amount: Decimal
    fee_native: Optional[Decimal] = None


@dataclass(frozen=True)
class NativeBridgeLink:
    l1_tx: str
    l2_tx: str
    message_number: int
    token: str
    amount: Decimal
    sender: str
    recipient: str
    l1_timestamp: int
    l2_timestamp: int
    l1_chain: str
    l2_chain: str
    direction: str = "L1_TO_L2"
    fee_native: Optional[Decimal] = None


# =============================================================================
# 레지스트리 / 가격 / 라벨 / 체인
# =============================================================================
@dataclass(frozen=True)
class ClassInfo:
    is_stable: bool
    is_native: bool


class EquivalenceRegistry:
    """(체인, 토큰 주소) → 동등 클래스 ("ETH", "USD", ...)"""

    def __init__(self) -> None:
        self._assets: Dict[Tuple[str, str], str] = {}
        self._classes: Dict[str, ClassInfo] = {}

    def add(self, chain: str, address: str, cls: str, is_stable: bool, is_native: bool) -> None:
        info = ClassInfo(is_stable, is_native)
        known = self._classes.get(cls)
        if known is not None and known != info:
            raise DataError(f"class {cls!r} has conflicting stable/native flags")
        key = (chain, address.lower())
        if key in self._assets and self._assets[key] != cls:
            raise DataError(f"asset {chain}:{address} mapped to both {self._assets[key]!r} and {cls!r}")
        self._classes[cls] = info
        self._assets[key] = cls

    def class_of(self, chain: str, address: str) -> Optional[str]:
        return self._assets.get((chain, address.lower()))

    def info(self, cls: str) -> ClassInfo:
        return self._classes[cls]

    def assets_of(self, chain: str, cls: str) -> List[str]:
        return sorted(a for (c, a), k in self._assets.items() if c == chain and k == cls)

    def rows(self) -> List[Tuple[str, str, str, bool, bool]]:
        return [
            (chain, address, cls, self._classes[cls].is_stable, self._classes[cls].is_native)
            for (chain, address), cls in sorted(self._assets.items())
        ]

    def __len__(self) -> int:
        return len(self._assets)


def hour_bucket(timestamp: int) -> int:
    return timestamp // HOUR


class PriceTable:
    """(클래스, 시간 버킷) → USD. 정확히 같은 버킷만 조회한다."""

    def __init__(self) -> None:
        self._prices: Dict[Tuple[str, int], float] = {}

    def add(self, cls: str, hour: int, usd: float) -> None:
        if not (math.isfinite(usd) and usd > 0):
            raise DataError(f"price for {cls}@{hour} must be finite and > 0, got {usd}")
        self._prices[(cls, hour)] = usd

    def at_hour(self, cls: str, hour: int) -> Optional[float]:
        return self._prices.get((cls, hour))

    def at(self, cls: str, timestamp: int) -> Optional[float]:
        return self._prices.get((cls, hour_bucket(timestamp)))

    def rows(self) -> List[Tuple[str, int, float]]:
        return [(cls, hour, usd) for (cls, hour), usd in sorted(self._prices.items())]

    def __len__(self) -> int:
        return len(self._prices)


@dataclass
class LabelSet:
    non_mev: Set[str] = field(default_factory=lambda: set[str]())
    mev: Set[str] = field(default_factory=lambda: set[str]())

    def add(self, address: str, kind: str) -> None:
        addr = address.lower()
        if kind == "non_mev":
            if addr in self.mev:
                raise DataError(f"address {addr} labeled both mev and non_mev")
            self.non_mev.add(addr)
        elif kind == "mev":
            if addr in self.non_mev:
                raise DataError(f"address {addr} labeled both mev and non_mev")
            self.mev.add(addr)
        else:
            raise DataError(f"unknown label kind {kind!r}")

    def is_non_mev(self, address: str) -> bool:
        return address.lower() in self.non_mev


@dataclass(frozen=True)
class ChainInfo:
    chain: str
    layer: str
    block_time: int
    native_class: str

    def block_of(self, timestamp: int) -> int:
        return timestamp // self.block_time


class ChainDirectory:
    def __init__(self, chains: Iterable[ChainInfo] = ()) -> None:
        self._chains: Dict[str, ChainInfo] = {}
        for info in chains:
            self.add(info)

    def add(self, info: ChainInfo) -> None:
        if info.layer not in ("L1", "L2"):
            raise DataError(f"chain {info.chain}: layer must be L1 or L2, got {info.layer!r}")
        if info.block_time <= 0:
            raise DataError(f"chain {info.chain}: block_time must be > 0")
        self._chains[info.chain] = info

    def get(self, chain: str) -> Optional[ChainInfo]:
        return self._chains.get(chain)

    def __iter__(self) -> Iterator[ChainInfo]:
        return iter(sorted(self._chains.values(), key=lambda c: c.chain))

    def __len__(self) -> int:
        return len(self._chains)


# =============================================================================
# 필드 파서
# =============================================================================
def _field(obj: Mapping[str, Any], name: str) -> Any:
    if name not in obj:
        raise ValueError(f"missing field {name!r}")
    return obj[name]


def _str(obj: Mapping[str, Any], name: str, lower: bool = False) -> str:
    value = _field(obj, name)
    if not isinstance(value, str) or not value:
        raise ValueError(f"{name} must be a non-empty string")
    return value.lower() if lower else value


def _opt_str(obj: Mapping[str, Any], name: str, lower: bool = False) -> Optional[str]:
    value = obj.get(name)
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ValueError(f"{name} must be a non-empty string or null")
    return value.lower() if lower else value


def _int(obj: Mapping[str, Any], name: str) -> int:
    value = _field(obj, name)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer")
    if value < 0:
        raise ValueError(f"invariant violation: {name} < 0")
    return value


def _decimal(value: Any, name: str) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ValueError(f"{name} must be a decimal string")
    try:
        amount = Decimal(str(value))
    except InvalidOperation:
        raise ValueError(f"{name} is not a decimal: {value!r}") from None
    if not amount.is_finite():
        raise ValueError(f"{name} must be finite")
    if amount < 0:
        raise ValueError(f"invariant violation: {name} < 0")
    return amount


def _amount(obj: Mapping[str, Any], name: str) -> Decimal:
    return _decimal(_field(obj, name), name)


def _opt_amount(obj: Mapping[str, Any], name: str) -> Optional[Decimal]:
    value = obj.get(name)
    return None if value is None else _decimal(value, name)


def _dec_str(value: Optional[Decimal]) -> Optional[str]:
    return None if value is None else str(value)


def parse_swap(obj: Mapping[str, Any]) -> SwapRecord:
    return SwapRecord(
        chain=_str(obj, "chain"),
        tx_hash=_str(obj, "tx_hash", lower=True),
        block=_int(obj, "block"),
        timestamp=_int(obj, "timestamp"),
        originator=_str(obj, "originator", lower=True),
        first_contact=_opt_str(obj, "first_contact", lower=True),
        asset_in=_str(obj, "asset_in", lower=True),
        asset_out=_str(obj, "asset_out", lower=True),
        amount_in=_amount(obj, "amount_in"),
        amount_out=_amount(obj, "amount_out"),
        gas_fee_native=_amount(obj, "gas_fee_native"),
        coinbase_tip_native=_amount(obj, "coinbase_tip_native"),
        recipient=_opt_str(obj, "recipient", lower=True),
    )


def swap_to_dict(rec: SwapRecord) -> Dict[str, Any]:
    return {
        "chain": rec.chain,
        "tx_hash": rec.tx_hash,
        "block": rec.block,
        "timestamp": rec.timestamp,
        "originator": rec.originator,
        "first_contact": rec.first_contact,
        "asset_in": rec.asset_in,
        "asset_out": rec.asset_out,
        "amount_in": str(rec.amount_in),
        "amount_out": str(rec.amount_out),
        "gas_fee_native": str(rec.gas_fee_native),
        "coinbase_tip_native": str(rec.coinbase_tip_native),
        "recipient": rec.recipient,
    }


def parse_raw_swap(obj: Mapping[str, Any]) -> RawSwapEvent:
    base = parse_swap(obj)
    return RawSwapEvent(
        chain=base.chain,
        tx_hash=base.tx_hash,
        log_index=_int(obj, "log_index"),
        block=base.block,
        timestamp=base.timestamp,
        originator=base.originator,
        first_contact=base.first_contact,
        asset_in=base.asset_in,
        asset_out=base.asset_out,
        amount_in=base.amount_in,
        amount_out=base.amount_out,
        gas_fee_native=base.gas_fee_native,
        coinbase_tip_native=base.coinbase_tip_native,
        recipient=base.recipient,
    )


def raw_swap_to_dict(ev: RawSwapEvent) -> Dict[str, Any]:
    row = swap_to_dict(
        SwapRecord(
            ev.chain, ev.tx_hash, ev.block, ev.timestamp, ev.originator, ev.first_contact,
            ev.asset_in, ev.asset_out, ev.amount_in, ev.amount_out,
            ev.gas_fee_native, ev.coinbase_tip_native, ev.recipient,
        )
    )
    row["log_index"] = ev.log_index
    return row


def parse_transfer(obj: Mapping[str, Any]) -> TransferRecord:
    rec = TransferRecord(
        chain=_str(obj, "chain"),
        tx_hash=_str(obj, "tx_hash", lower=True),
        log_index=_int(obj, "log_index"),
        block=_int(obj, "block"),
        timestamp=_int(obj, "timestamp"),
        token=_str(obj, "token", lower=True),
        from_addr=_str(obj, "from", lower=True),
        to_addr=_str(obj, "to", lower=True),
        amount=_amount(obj, "amount"),
        fee_native=_opt_amount(obj, "fee_native"),
    )
    if rec.amount == 0:
        raise ValueError("invariant violation: transfer amount must be > 0")
    return rec


def transfer_to_dict(rec: TransferRecord) -> Dict[str, Any]:
    return {
        "chain": rec.chain,
        "tx_hash": rec.tx_hash,
        "log_index": rec.log_index,
        "block": rec.block,
        "timestamp": rec.timestamp,
        "token": rec.token,
        "from": rec.from_addr,
        "to": rec.to_addr,
        "amount": str(rec.amount),
        "fee_native": _dec_str(rec.fee_native),
    }


def parse_native_link(obj: Mapping[str, Any]) -> NativeBridgeLink:
    link = NativeBridgeLink(
        l1_tx=_str(obj, "l1_tx", lower=True),
        l2_tx=_str(obj, "l2_tx", lower=True),
        message_number=_int(obj, "message_number"),
        token=_str(obj, "token", lower=True),
        amount=_amount(obj, "amount"),
        sender=_str(obj, "sender", lower=True),
        recipient=_str(obj, "recipient", lower=True),
        l1_timestamp=_int(obj, "l1_timestamp"),
        l2_timestamp=_int(obj, "l2_timestamp"),
        l1_chain=_str(obj, "l1_chain"),
        l2_chain=_str(obj, "l2_chain"),
        direction=obj.get("direction", "L1_TO_L2"),
        fee_native=_opt_amount(obj, "fee_native"),
    )
    if link.direction != "L1_TO_L2":
        raise ValueError(f"invariant violation: direction must be L1_TO_L2, got {link.direction!r}")
    if link.l2_timestamp < link.l1_timestamp:
        raise ValueError("invariant violation: l2_timestamp < l1_timestamp")
    return link


def native_link_to_dict(link: NativeBridgeLink) -> Dict[str, Any]:
    return {
        "l1_tx": link.l1_tx,
        "l2_tx": link.l2_tx,
        "message_number": link.message_number,
        "token": link.token,
        "amount": str(link.amount),
        "sender": link.sender,
        "recipient": link.recipient,
        "l1_timestamp": link.l1_timestamp,
        "l2_timestamp": link.l2_timestamp,
        "l1_chain": link.l1_chain,
        "l2_chain": link.l2_chain,
        "direction": link.direction,
        "fee_native": _dec_str(link.fee_native),
    }


# =============================================================================
# 스트리밍 읽기
# =============================================================================
@dataclass
class LoadReport:
    kind: str
    records: int = 0
    skipped: int = 0
    errors: List[Tuple[int, str]] = field(default_factory=lambda: list[Tuple[int, str]]())

    def reject(self, line_no: int, reason: str) -> None:
        self.skipped += 1
        if len(self.errors) < MAX_STORED_ERRORS:
            self.errors.append((line_no, reason))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "records": self.records,
            "skipped": self.skipped,
            "errors": [{"line": n, "reason": r} for n, r in self.errors],
        }


INVALID_UTF8 = "invalid UTF-8"


def _check_version(version: Any, line_no: int) -> None:
    if version not in SUPPORTED_VERSIONS:
        raise SchemaViolationError(f"unsupported schema_version {version!r}", line_no)


def iter_jsonl(
    path: Path,
    kind: str,
    parse: Callable[[Mapping[str, Any]], T],
    strict: bool = False,
    report: Optional[LoadReport] = None,
) -> Iterator[T]:
    """
    JSONL 파일을 한 줄씩 파싱해 레코드를 파일 순서대로 내보낸다.
    버전 헤더의 종류나 버전이 맞지 않으면 모드와 상관없이 SchemaViolationError.
    """
    rep = report if report is not None else LoadReport(kind)
    header_seen = False
    for line_no, line in iter_lines(path):
        try:
            if line is None:
                raise ValueError(INVALID_UTF8)
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
        except ValueError as e:
            header_seen = True
            if strict:
                raise SchemaViolationError(str(e), line_no) from e
            rep.reject(line_no, str(e))
            continue

        if not header_seen:
            header_seen = True
            if "schema_version" in obj:
                if obj.get("schema") != kind:
                    raise SchemaViolationError(f"expected schema {kind!r}, got {obj.get('schema')!r}", line_no)
                _check_version(obj["schema_version"], line_no)
                continue

        try:
            record = parse(obj)
        except ValueError as e:
            if strict:
                raise SchemaViolationError(str(e), line_no) from e
            rep.reject(line_no, str(e))
            continue
        rep.records += 1
        yield record


def write_jsonl(path: Path, kind: str, rows: Iterable[Dict[str, Any]]) -> None:
    header: Dict[str, Any] = {"schema": kind, "schema_version": SCHEMA_VERSION}
    save_jsonl(path, _prepend(header, rows))


def _prepend(head: Dict[str, Any], rows: Iterable[Dict[str, Any]]) -> Iterator[Dict[str, Any]]:
    yield head
    yield from rows


def load_swaps(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> Iterator[SwapRecord]:
    return iter_jsonl(path, "swaps", parse_swap, strict, report)


def load_raw_swaps(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> Iterator[RawSwapEvent]:
    return iter_jsonl(path, "raw_swaps", parse_raw_swap, strict, report)


def load_transfers(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> Iterator[TransferRecord]:
    return iter_jsonl(path, "transfers", parse_transfer, strict, report)


def load_native_links(
    path: Path, strict: bool = False, report: Optional[LoadReport] = None
) -> Iterator[NativeBridgeLink]:
    return iter_jsonl(path, "native_links", parse_native_link, strict, report)


def write_swaps(path: Path, records: Iterable[SwapRecord]) -> None:
    write_jsonl(path, "swaps", (swap_to_dict(r) for r in records))


def write_raw_swaps(path: Path, events: Iterable[RawSwapEvent]) -> None:
    write_jsonl(path, "raw_swaps", (raw_swap_to_dict(e) for e in events))


def write_transfers(path: Path, records: Iterable[TransferRecord]) -> None:
    write_jsonl(path, "transfers", (transfer_to_dict(r) for r in records))


def write_native_links(path: Path, links: Iterable[NativeBridgeLink]) -> None:
    write_jsonl(path, "native_links", (native_link_to_dict(link) for link in links))


# =============================================================================
# CSV (가격, 동등 클래스, 라벨, 체인)
# =============================================================================
def _iter_csv_rows(
    path: Path,
    columns: Sequence[str],
    strict: bool,
    report: LoadReport,
) -> Iterator[Tuple[int, List[str]]]:
    for line_no, line in iter_lines(path):
        if line is None:
            if strict:
                raise SchemaViolationError(INVALID_UTF8, line_no)
            report.reject(line_no, INVALID_UTF8)
            continue
        if line.startswith("#"):
            text = line.lstrip("#").strip()
            if text.startswith("schema_version="):
                raw = text.split("=", 1)[1].strip()
                _check_version(int(raw) if raw.isdigit() else raw, line_no)
            continue
        row = [cell.strip() for cell in next(csv.reader([line]))]
        if [c.lower() for c in row] == list(columns):
            continue
        if len(row) != len(columns):
            reason = f"expected {len(columns)} columns, got {len(row)}"
            if strict:
                raise SchemaViolationError(reason, line_no)
            report.reject(line_no, reason)
            continue
        yield line_no, row


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _load_csv_table(
    path: Path,
    kind: str,
    columns: Sequence[str],
    apply: Callable[[List[str]], None],
    strict: bool,
    report: Optional[LoadReport],
) -> LoadReport:
    rep = report if report is not None else LoadReport(kind)
    for line_no, row in _iter_csv_rows(path, columns, strict, rep):
        try:
            apply(row)
        except (ValueError, DataError) as e:
            if strict:
                raise SchemaViolationError(str(e), line_no) from e
            rep.reject(line_no, str(e))
            continue
        rep.records += 1
    return rep


PRICE_COLUMNS = ("class", "hour", "usd")
EQUIVALENCE_COLUMNS = ("chain", "address", "class", "is_stable", "is_native")
LABEL_COLUMNS = ("address", "kind")
CHAIN_COLUMNS = ("chain", "layer", "block_time", "native_class")


def load_prices(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> PriceTable:
    table = PriceTable()

    def apply(row: List[str]) -> None:
        table.add(row[0], int(row[1]), float(row[2]))

    _load_csv_table(path, "prices", PRICE_COLUMNS, apply, strict, report)
    return table


def load_equivalence(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> EquivalenceRegistry:
    registry = EquivalenceRegistry()

    def apply(row: List[str]) -> None:
        registry.add(row[0], row[1], row[2], _parse_bool(row[3]), _parse_bool(row[4]))

    _load_csv_table(path, "equivalence", EQUIVALENCE_COLUMNS, apply, strict, report)
    return registry


def load_labels(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> LabelSet:
    labels = LabelSet()

    def apply(row: List[str]) -> None:
        labels.add(row[0], row[1])

    _load_csv_table(path, "labels", LABEL_COLUMNS, apply, strict, report)
    return labels


def load_chains(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> ChainDirectory:
    chains = ChainDirectory()

    def apply(row: List[str]) -> None:
        chains.add(ChainInfo(row[0], row[1], int(row[2]), row[3]))

    _load_csv_table(path, "chains", CHAIN_COLUMNS, apply, strict, report)
    return chains


def _write_table(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    save_csv(path, [list(columns), *[list(r) for r in rows]], comment=f"schema_version={SCHEMA_VERSION}")


def _bool_str(flag: bool) -> str:
    return "true" if flag else "false"


def write_prices(path: Path, table: PriceTable) -> None:
    _write_table(path, PRICE_COLUMNS, ((c, h, repr(u)) for c, h, u in table.rows()))


def write_equivalence(path: Path, registry: EquivalenceRegistry) -> None:
    _write_table(
        path,
        EQUIVALENCE_COLUMNS,
        ((ch, a, c, _bool_str(s), _bool_str(n)) for ch, a, c, s, n in registry.rows()),
    )


def write_labels(path: Path, labels: LabelSet) -> None:
    rows = [(a, "non_mev") for a in sorted(labels.non_mev)] + [(a, "mev") for a in sorted(labels.mev)]
    _write_table(path, LABEL_COLUMNS, rows)


def write_chains(path: Path, chains: ChainDirectory) -> None:
    _write_table(path, CHAIN_COLUMNS, ((c.chain, c.layer, c.block_time, c.native_class) for c in chains))


# =============================================================================
# 트랜잭션 단위 집계
# =============================================================================
def aggregate_tx_swaps(events: Sequence[RawSwapEvent]) -> SwapRecord:
    """
    한 트랜잭션의 홉 단위 스왑들을 (최초 입력 자산 → 최종 출력 자산) 레코드 하나로 합친다.

    최초 입력 = 입력으로만 쓰이고 출력으로는 한 번도 나오지 않은 유일한 자산
    최종 출력 = 출력으로만 나오고 입력으로는 한 번도 쓰이지 않은 유일한 자산
    중간 자산은 버린다. 유일하게 정해지지 않으면 AmbiguousEndpointsError.
    """
    if not events:
        raise DataError("aggregate_tx_swaps needs at least one event")
    first = events[0]
    for ev in events[1:]:
        if (ev.chain, ev.tx_hash) != (first.chain, first.tx_hash):
            raise DataError(f"events of {first.chain}:{first.tx_hash} mixed with {ev.chain}:{ev.tx_hash}")

    ordered = sorted(events, key=lambda e: e.log_index)
    inputs = OrderedDict((e.asset_in, None) for e in ordered)
    outputs = OrderedDict((e.asset_out, None) for e in ordered)
    sources = [a for a in inputs if a not in outputs]
    sinks = [a for a in outputs if a not in inputs]
    if len(sources) != 1 or len(sinks) != 1:
        raise AmbiguousEndpointsError(
            first.chain, first.tx_hash, f"{len(sources)} source(s), {len(sinks)} sink(s)"
        )
    source, sink = sources[0], sinks[0]
    last_hop = ordered[-1]
    return SwapRecord(
        chain=first.chain,
        tx_hash=first.tx_hash,
        block=first.block,
        timestamp=first.timestamp,
        originator=first.originator,
        first_contact=first.first_contact,
        asset_in=source,
        asset_out=sink,
        amount_in=sum((e.amount_in for e in ordered if e.asset_in == source), Decimal(0)),
        amount_out=sum((e.amount_out for e in ordered if e.asset_out == sink), Decimal(0)),
        gas_fee_native=first.gas_fee_native,
        coinbase_tip_native=first.coinbase_tip_native,
        recipient=last_hop.recipient,
    )


@dataclass
class AggregationReport:
    transactions: int = 0
    ambiguous: List[TxKey] = field(default_factory=lambda: list[TxKey]())


def aggregate_swaps(
    events: Iterable[RawSwapEvent],
    report: Optional[AggregationReport] = None,
) -> List[SwapRecord]:
    """트랜잭션별로 묶어 aggregate_tx_swaps. 모호한 트랜잭션은 제외하고 report에 남긴다."""
    rep = report if report is not None else AggregationReport()
    groups: Dict[TxKey, List[RawSwapEvent]] = OrderedDict()
    for ev in events:
        groups.setdefault((ev.chain, ev.tx_hash), []).append(ev)

    records: List[SwapRecord] = []
    for key, group in groups.items():
        rep.transactions += 1
        try:
            records.append(aggregate_tx_swaps(group))
        except AmbiguousEndpointsError:
            rep.ambiguous.append(key)
    return records
