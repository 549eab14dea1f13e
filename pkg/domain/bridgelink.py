# domain/bridgelink.py
"""
[실행 방식 분류기]

매치 하나가 어떻게 체결됐는지 판정한다.

    NativeBridge      (l1 → l2) 네이티브 브릿지 메시지가 두 다리 사이에 있다
    MultichainBridge  leg1 체인에서 나간 토큰 전송과 leg2 체인으로 들어온 토큰 전송이 짝을 이룬다
    Inventory         둘 다 아니다

우선순위는 Native → Multichain → Inventory. 둘 다 맞으면 Native를 택하고 ambiguous로 표시한다.
인덱스는 한 번 만들면 읽기만 하므로 매치별 분류를 병렬로 돌려도 된다.
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from domain.chaindata import (
    ChainDirectory,
    EquivalenceRegistry,
    LoadReport,
    NativeBridgeLink,
    TransferRecord,
    iter_jsonl,
    write_jsonl,
)
from domain.detector import ArbMatch, match_to_dict, parse_match


class ExecutionMethod(str, Enum):
    INVENTORY = "Inventory"
    NATIVE_BRIDGE = "NativeBridge"
    MULTICHAIN_BRIDGE = "MultichainBridge"


@dataclass(frozen=True)
class BridgeTx:
    chain: str
    tx_hash: str
    timestamp: int


@dataclass(frozen=True)
class ExecutionClass:
    method: ExecutionMethod
    bridge_out: Optional[BridgeTx] = None
    bridge_in: Optional[BridgeTx] = None
    bridge_latency_seconds: Optional[int] = None
    bridge_fee_native: Optional[Decimal] = None
    ambiguous: bool = False

    @property
    def is_bridge(self) -> bool:
        return self.method is not ExecutionMethod.INVENTORY


INVENTORY = ExecutionClass(ExecutionMethod.INVENTORY)


def bridge_share(match: ArbMatch, execution: ExecutionClass) -> Optional[float]:
    """정산 시간 중 브릿지 구간의 비율 (0~1). Inventory면 None."""
    if execution.bridge_latency_seconds is None:
        return None
    settlement = match.leg2.timestamp - match.leg1.timestamp
    if settlement <= 0:
        return 0.0
    return min(max(execution.bridge_latency_seconds / settlement, 0.0), 1.0)


# =============================================================================
# 인덱스
# =============================================================================
class NativeLinkIndex:
    """참여 주소(sender/recipient) → l1 시각 순 링크. l1→l2 방향만 담는다."""

    def __init__(self, links: Iterable[NativeBridgeLink]) -> None:
        by_addr: Dict[str, List[NativeBridgeLink]] = defaultdict(list)
        self.skipped = 0
        for link in links:
            if link.direction != "L1_TO_L2":
                self.skipped += 1
                continue
            by_addr[link.sender].append(link)
            if link.recipient != link.sender:
                by_addr[link.recipient].append(link)
        self._by_addr: Dict[str, List[NativeBridgeLink]] = {}
        self._times: Dict[str, List[int]] = {}
        for addr, items in by_addr.items():
            ordered = sorted(items, key=lambda k: (k.l1_timestamp, k.message_number, k.l1_tx))
            self._by_addr[addr] = ordered
            self._times[addr] = [k.l1_timestamp for k in ordered]

    def between(self, address: str, t_from: int, t_to: int) -> List[NativeBridgeLink]:
        items = self._by_addr.get(address)
        if not items:
            return []
        times = self._times[address]
        return items[bisect_left(times, t_from) : bisect_right(times, t_to)]


class TransferIndex:
    """(체인, 토큰) → 블록/시각 순 전송 목록"""

    def __init__(self, transfers: Iterable[TransferRecord]) -> None:
        grouped: Dict[Tuple[str, str], List[TransferRecord]] = defaultdict(list)
        for rec in transfers:
            grouped[(rec.chain, rec.token)].append(rec)
        self._items: Dict[Tuple[str, str], List[TransferRecord]] = {}
        self._times: Dict[Tuple[str, str], List[int]] = {}
        for key, items in grouped.items():
            ordered = sorted(items, key=lambda r: (r.timestamp, r.block, r.tx_hash, r.log_index))
            self._items[key] = ordered
            self._times[key] = [r.timestamp for r in ordered]

    def window(self, chain: str, token: str, t_from: int, t_to: int) -> List[TransferRecord]:
        items = self._items.get((chain, token))
        if not items:
            return []
        times = self._times[(chain, token)]
        return items[bisect_left(times, t_from) : bisect_right(times, t_to)]


# =============================================================================
# 분류
# =============================================================================
def classify_native(
    match: ArbMatch,
    links: NativeLinkIndex,
    registry: EquivalenceRegistry,
) -> Optional[ExecutionClass]:
    """
    참여 주소가 매치의 originator/first_contact 중 하나이고, leg1 체인에서 leg2 체인으로 가며,
    토큰이 leg1 출력과 같은 클래스이고, l1 시각 ≥ t1, l2 시각 ≤ t2 인 링크.
    여러 개면 l1 시각이 t1에 가장 가까운 것.
    """
    leg1, leg2 = match.leg1, match.leg2
    bridged_cls = registry.class_of(leg1.chain, leg1.asset_out)
    if bridged_cls is None:
        return None
    participants = sorted({leg1.originator, leg2.originator} | ({leg1.first_contact} if leg1.first_contact else set()))

    best: Optional[NativeBridgeLink] = None
    for addr in participants:
        for link in links.between(addr, leg1.timestamp, leg2.timestamp):
            if link.l2_timestamp > leg2.timestamp:
                continue
            if link.l1_chain != leg1.chain or link.l2_chain != leg2.chain:
                continue
            if registry.class_of(link.l1_chain, link.token) != bridged_cls:
                continue
            if best is None or (link.l1_timestamp, link.message_number) < (best.l1_timestamp, best.message_number):
                best = link
    if best is None:
        return None
    assert best.direction == "L1_TO_L2"
    return ExecutionClass(
        method=ExecutionMethod.NATIVE_BRIDGE,
        bridge_out=BridgeTx(best.l1_chain, best.l1_tx, best.l1_timestamp),
        bridge_in=BridgeTx(best.l2_chain, best.l2_tx, best.l2_timestamp),
        bridge_latency_seconds=best.l2_timestamp - best.l1_timestamp,
        bridge_fee_native=best.fee_native if best.fee_native is not None else Decimal(0),
    )


def classify_token_transfer(match: ArbMatch, transfers: TransferIndex) -> Optional[ExecutionClass]:
    """
    정방향: leg1 체인에서 t1 이후 leg1 출력 토큰을 leg1 수령 주소가 보낸 전송 (가장 이른 것)
    역방향: leg2 체인에서 t2 이전 leg2 입력 토큰을 leg2 발신자가 받은 전송 (가장 늦은 것)
    둘 다 [t1, t2] 안에 있고 나간 전송이 들어온 전송보다 늦지 않아야 한다.
    """
    leg1, leg2 = match.leg1, match.leg2
    t1, t2 = leg1.timestamp, leg2.timestamp
    sender = leg1.receiver
    out_tx = next(
        (r for r in transfers.window(leg1.chain, leg1.asset_out, t1, t2) if r.from_addr == sender),
        None,
    )
    if out_tx is None:
        return None
    in_tx = next(
        (
            r
            for r in reversed(transfers.window(leg2.chain, leg2.asset_in, out_tx.timestamp, t2))
            if r.to_addr == leg2.originator
        ),
        None,
    )
    if in_tx is None:
        return None
    return ExecutionClass(
        method=ExecutionMethod.MULTICHAIN_BRIDGE,
        bridge_out=BridgeTx(out_tx.chain, out_tx.tx_hash, out_tx.timestamp),
        bridge_in=BridgeTx(in_tx.chain, in_tx.tx_hash, in_tx.timestamp),
        bridge_latency_seconds=in_tx.timestamp - out_tx.timestamp,
        bridge_fee_native=out_tx.fee_native if out_tx.fee_native is not None else Decimal(0),
    )


@dataclass
class BridgeIndex:
    links: NativeLinkIndex
    transfers: TransferIndex
    registry: EquivalenceRegistry

    @classmethod
    def build(
        cls,
        links: Iterable[NativeBridgeLink],
        transfers: Iterable[TransferRecord],
        registry: EquivalenceRegistry,
    ) -> "BridgeIndex":
        return cls(NativeLinkIndex(links), TransferIndex(transfers), registry)


def classify(match: ArbMatch, index: BridgeIndex) -> ExecutionClass:
    native = classify_native(match, index.links, index.registry)
    multichain = classify_token_transfer(match, index.transfers)
    if native is not None:
        if multichain is not None:
            return ExecutionClass(
                method=native.method,
                bridge_out=native.bridge_out,
                bridge_in=native.bridge_in,
                bridge_latency_seconds=native.bridge_latency_seconds,
                bridge_fee_native=native.bridge_fee_native,
                ambiguous=True,
            )
        return native
    return multichain or INVENTORY


@dataclass(frozen=True)
class ClassifiedMatch:
    match: ArbMatch
    execution: ExecutionClass


def classify_all(matches: Sequence[ArbMatch], index: BridgeIndex) -> List[ClassifiedMatch]:
    return [ClassifiedMatch(m, classify(m, index)) for m in matches]


# =============================================================================
# 보고서
# =============================================================================
def chain_pair_category(chains: ChainDirectory, a: str, b: str) -> str:
    """L1-L1 / L1-L2 / L2-L2 (모르는 체인은 '?')"""
    layers = sorted((info.layer if (info := chains.get(c)) is not None else "?") for c in (a, b))
    return f"{layers[0]}-{layers[1]}"


@dataclass
class BridgeReport:
    methods: Counter[str] = field(default_factory=lambda: Counter[str]())
    ambiguous: int = 0
    by_category: Dict[str, Counter[str]] = field(default_factory=lambda: dict[str, Counter[str]]())
    latencies: Dict[str, List[int]] = field(default_factory=lambda: dict[str, List[int]]())
    shares: Dict[str, List[float]] = field(default_factory=lambda: dict[str, List[float]]())

    def add(self, cm: ClassifiedMatch, chains: Optional[ChainDirectory] = None) -> None:
        method = cm.execution.method.value
        self.methods[method] += 1
        if cm.execution.ambiguous:
            self.ambiguous += 1
        if chains is not None:
            category = chain_pair_category(chains, cm.match.leg1.chain, cm.match.leg2.chain)
            self.by_category.setdefault(category, Counter[str]())[method] += 1
        if cm.execution.bridge_latency_seconds is not None:
            self.latencies.setdefault(method, []).append(cm.execution.bridge_latency_seconds)
            share = bridge_share(cm.match, cm.execution)
            if share is not None:
                self.shares.setdefault(method, []).append(share)

    def to_dict(self) -> Dict[str, Any]:
        total = sum(self.methods.values())
        categories: Dict[str, Any] = {}
        for category, counts in sorted(self.by_category.items()):
            n = sum(counts.values())
            categories[category] = {
                "count": n,
                "shares": {m.value: counts.get(m.value, 0) / n for m in ExecutionMethod},
            }
        return {
            "total": total,
            "counts": {m.value: self.methods.get(m.value, 0) for m in ExecutionMethod},
            "shares": {m.value: (self.methods.get(m.value, 0) / total if total else 0.0) for m in ExecutionMethod},
            "ambiguous": self.ambiguous,
            "by_chain_pair": categories,
            "mean_bridge_latency_seconds": {
                m: math.fsum(v) / len(v) for m, v in sorted(self.latencies.items()) if v
            },
            "mean_bridge_share_of_settlement": {
                m: math.fsum(v) / len(v) for m, v in sorted(self.shares.items()) if v
            },
        }


def build_bridge_report(
    classified: Iterable[ClassifiedMatch], chains: Optional[ChainDirectory] = None
) -> BridgeReport:
    report = BridgeReport()
    for cm in classified:
        report.add(cm, chains)
    return report


# =============================================================================
# 직렬화 (matches.jsonl)
# =============================================================================
def _tx_to_dict(tx: Optional[BridgeTx]) -> Optional[Dict[str, Any]]:
    if tx is None:
        return None
    return {"chain": tx.chain, "tx_hash": tx.tx_hash, "timestamp": tx.timestamp}


def _tx_from(obj: Any) -> Optional[BridgeTx]:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValueError("bridge tx must be an object")
    return BridgeTx(str(obj["chain"]), str(obj["tx_hash"]).lower(), int(obj["timestamp"]))


def execution_to_dict(e: ExecutionClass) -> Dict[str, Any]:
    return {
        "method": e.method.value,
        "bridge_out": _tx_to_dict(e.bridge_out),
        "bridge_in": _tx_to_dict(e.bridge_in),
        "bridge_latency_seconds": e.bridge_latency_seconds,
        "bridge_fee_native": None if e.bridge_fee_native is None else str(e.bridge_fee_native),
        "ambiguous": e.ambiguous,
    }


def parse_execution(obj: Mapping[str, Any]) -> ExecutionClass:
    try:
        method = ExecutionMethod(obj["method"])
        fee = obj.get("bridge_fee_native")
        latency = obj.get("bridge_latency_seconds")
        execution = ExecutionClass(
            method=method,
            bridge_out=_tx_from(obj.get("bridge_out")),
            bridge_in=_tx_from(obj.get("bridge_in")),
            bridge_latency_seconds=None if latency is None else int(latency),
            bridge_fee_native=None if fee is None else Decimal(str(fee)),
            ambiguous=bool(obj.get("ambiguous", False)),
        )
    except (KeyError, TypeError, ArithmeticError) as e:
        raise ValueError(f"malformed execution_class: {e}") from e
    has_bridge = execution.bridge_out is not None and execution.bridge_in is not None
    if has_bridge != execution.is_bridge:
        raise ValueError("bridge fields must be present exactly when the method is a bridge")
    return execution


def classified_to_dict(cm: ClassifiedMatch) -> Dict[str, Any]:
    row = match_to_dict(cm.match)
    row["execution_class"] = execution_to_dict(cm.execution)
    return row


def parse_classified(obj: Mapping[str, Any]) -> ClassifiedMatch:
    execution = obj.get("execution_class")
    return ClassifiedMatch(
        match=parse_match(obj),
        execution=parse_execution(execution) if isinstance(execution, dict) else INVENTORY,
    )


def write_matches(path: Path, classified: Iterable[ClassifiedMatch]) -> None:
    write_jsonl(path, "matches", (classified_to_dict(cm) for cm in classified))


def load_matches(path: Path, strict: bool = False, report: Optional[LoadReport] = None) -> Iterator[ClassifiedMatch]:
    return iter_jsonl(path, "matches", parse_classified, strict, report)
