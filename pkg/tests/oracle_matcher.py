# tests/oracle_matcher.py
"""
느리지만 단순한 기준 매처.

모든 스왑 쌍을 직접 검사하고, 매 단계마다 남은 후보 중 가장 순위가 높은 것을
고르는 방식으로 중복 제거를 한다. detect()의 결과와 비교하는 데만 쓴다.
"""
from __future__ import annotations

from decimal import Decimal
from typing import List, Optional, Set, Tuple

from domain.chaindata import EquivalenceRegistry, LabelSet, SwapRecord, TxKey
from domain.detector import DetectorConfig

MatchKey = Tuple[TxKey, TxKey]


def _window(registry: EquivalenceRegistry, a: str, b: str, config: DetectorConfig) -> int:
    ia, ib = registry.info(a), registry.info(b)
    if (ia.is_stable and ib.is_native) or (ia.is_native and ib.is_stable):
        return config.window_stable_seconds
    return config.window_other_seconds


def _linked(leg1: SwapRecord, leg2: SwapRecord, labels: LabelSet) -> bool:
    if leg1.originator == leg2.originator:
        return True
    return (
        leg1.first_contact is not None
        and leg1.first_contact == leg2.first_contact
        and leg1.first_contact not in labels.non_mev
    )


def oracle_candidates(
    swaps: List[SwapRecord],
    registry: EquivalenceRegistry,
    labels: LabelSet,
    config: DetectorConfig,
) -> List[Tuple[SwapRecord, SwapRecord, Decimal, int]]:
    unique = list(dict.fromkeys(swaps))
    out: List[Tuple[SwapRecord, SwapRecord, Decimal, int]] = []
    for leg1 in unique:
        for leg2 in unique:
            if leg1.chain == leg2.chain:
                continue
            c = [
                registry.class_of(leg1.chain, leg1.asset_in),
                registry.class_of(leg1.chain, leg1.asset_out),
                registry.class_of(leg2.chain, leg2.asset_in),
                registry.class_of(leg2.chain, leg2.asset_out),
            ]
            if None in c or c[0] == c[1] or leg1.amount_out == 0 or leg2.amount_out == 0:
                continue
            if c[1] != c[2] or c[3] != c[0]:
                continue
            diff = abs(leg1.amount_out - leg2.amount_in) / leg1.amount_out
            if diff > config.marginal_threshold:
                continue
            gap = leg2.timestamp - leg1.timestamp
            assert c[0] is not None and c[1] is not None
            if gap < -config.clock_skew_tolerance or gap > _window(registry, c[0], c[1], config):
                continue
            if not _linked(leg1, leg2, labels):
                continue
            out.append((leg1, leg2, diff, abs(gap)))
    return out


def oracle_matches(
    swaps: List[SwapRecord],
    registry: EquivalenceRegistry,
    labels: LabelSet,
    config: DetectorConfig,
) -> Set[MatchKey]:
    remaining = oracle_candidates(swaps, registry, labels, config)
    used: Set[TxKey] = set()
    chosen: Set[MatchKey] = set()

    def rank(c: Tuple[SwapRecord, SwapRecord, Decimal, int]) -> Tuple[object, ...]:
        leg1, leg2, diff, gap = c
        return (
            diff >= config.dedup_marginal,
            gap > config.dedup_gap_seconds,
            diff,
            gap,
            leg1.tx_hash,
            leg1.chain,
            leg2.tx_hash,
            leg2.chain,
        )

    while True:
        best: Optional[Tuple[SwapRecord, SwapRecord, Decimal, int]] = None
        for c in remaining:
            if c[0].key in used or c[1].key in used:
                continue
            if best is None or rank(c) < rank(best):
                best = c
        if best is None:
            return chosen
        used.add(best[0].key)
        used.add(best[1].key)
        chosen.add((best[0].key, best[1].key))
