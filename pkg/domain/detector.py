# domain/detector.py
"""
[교차 체인 차익거래 탐지기]

두 스왑 (leg1 on chain i, leg2 on chain j)을 한 쌍의 차익거래로 판정하는 규칙:

    H1  동등 클래스 기준으로 닫힌 고리: class(out1) == class(in2), class(out2) == class(in1)
    H2  |x_out1 − x_in2| / x_out1 ≤ marginal_threshold
    H3  t1 − skew ≤ t2 ≤ t1 + window
        window = 12 s (stablecoin-native 쌍) / 3600 s (그 외)
    H4  같은 originator, 또는 같은 first_contact 이면서 그 주소가 non-MEV 라벨에 없음

후보 생성은 (클래스 쌍) 버킷 단위로 나누어 병렬화할 수 있다.
중복 제거는 전역 정렬 후 한 번의 탐욕적 순회로 끝난다.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
)

from core.exceptions import ConfigError
from domain.chaindata import (
    EquivalenceRegistry,
    LabelSet,
    SwapRecord,
    TxKey,
    parse_swap,
    swap_to_dict,
)

ClassPair = Tuple[str, str]


class PairClass(str, Enum):
    STABLECOIN_NATIVE = "StablecoinNative"
    OTHER = "Other"


@dataclass(frozen=True)
class DetectorConfig:
    marginal_threshold: Decimal = Decimal("0.005")
    dedup_marginal: Decimal = Decimal("0.001")
    dedup_gap_seconds: int = 240
    window_stable_seconds: int = 12
    window_other_seconds: int = 3600
    clock_skew_tolerance: int = 0

    def __post_init__(self) -> None:
        if not Decimal(0) < self.dedup_marginal <= self.marginal_threshold:
            raise ConfigError(
                f"need 0 < dedup_marginal ({self.dedup_marginal}) <= marginal_threshold ({self.marginal_threshold})"
            )
        if self.window_stable_seconds <= 0 or self.window_other_seconds <= 0:
            raise ConfigError("time windows must be > 0")
        if self.dedup_gap_seconds < 0 or self.clock_skew_tolerance < 0:
            raise ConfigError("dedup_gap_seconds and clock_skew_tolerance must be >= 0")

    def window_for(self, pair_class: PairClass) -> int:
        if pair_class is PairClass.STABLECOIN_NATIVE:
            return self.window_stable_seconds
        return self.window_other_seconds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "marginal_threshold": str(self.marginal_threshold),
            "dedup_marginal": str(self.dedup_marginal),
            "dedup_gap_seconds": self.dedup_gap_seconds,
            "window_stable_seconds": self.window_stable_seconds,
            "window_other_seconds": self.window_other_seconds,
            "clock_skew_tolerance": self.clock_skew_tolerance,
        }


@dataclass(frozen=True)
class Candidate:
    leg1: SwapRecord
    leg2: SwapRecord
    marginal_diff: Decimal
    time_gap: int
    pair_class: PairClass

    @property
    def key(self) -> Tuple[TxKey, TxKey]:
        return (self.leg1.key, self.leg2.key)


@dataclass(frozen=True)
class ArbMatch:
    leg1: SwapRecord
    leg2: SwapRecord
    marginal_diff: Decimal
    time_gap: int
    pair_class: PairClass
    entity: str
    dedup_level: int
    dedup_rank: int

    @property
    def settlement_seconds(self) -> int:
        return self.leg2.timestamp - self.leg1.timestamp

    @property
    def key(self) -> Tuple[TxKey, TxKey]:
        return (self.leg1.key, self.leg2.key)


@dataclass
class DetectReport:
    swaps_in: int = 0
    duplicates: int = 0
    unmapped: int = 0
    zero_output: int = 0
    same_class: int = 0
    buckets: int = 0
    candidates: int = 0
    rejected_h4: int = 0
    matches: int = 0
    dedup_levels: Counter[int] = field(default_factory=lambda: Counter[int]())
    unmapped_assets: Set[Tuple[str, str]] = field(default_factory=lambda: set[Tuple[str, str]]())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "swaps_in": self.swaps_in,
            "duplicates": self.duplicates,
            "unmapped": self.unmapped,
            "unmapped_assets": [f"{c}:{a}" for c, a in sorted(self.unmapped_assets)],
            "zero_output": self.zero_output,
            "same_class": self.same_class,
            "buckets": self.buckets,
            "candidates": self.candidates,
            "rejected_h4": self.rejected_h4,
            "matches": self.matches,
            "dedup_levels": {str(level): self.dedup_levels.get(level, 0) for level in (1, 2, 3)},
        }


# =============================================================================
# 규칙
# =============================================================================
def marginal_difference(leg1: SwapRecord, leg2: SwapRecord) -> Decimal:
    """|x_out1 − x_in2| / x_out1 (분모는 leg1 출력)"""
    return abs(leg1.amount_out - leg2.amount_in) / leg1.amount_out


def pair_class_of(registry: EquivalenceRegistry, class_a: str, class_b: str) -> PairClass:
    a, b = registry.info(class_a), registry.info(class_b)
    if (a.is_stable and b.is_native) or (a.is_native and b.is_stable):
        return PairClass.STABLECOIN_NATIVE
    return PairClass.OTHER


def entity_link(leg1: SwapRecord, leg2: SwapRecord, labels: LabelSet) -> bool:
    """H4: 같은 EOA가 보냈거나, non-MEV 라벨이 없는 같은 컨트랙트를 처음 호출했다."""
    if leg1.originator == leg2.originator:
        return True
    contact = leg1.first_contact
    return contact is not None and contact == leg2.first_contact and not labels.is_non_mev(contact)


def entity_of(leg1: SwapRecord, leg2: SwapRecord) -> str:
    if leg1.originator == leg2.originator:
        return leg1.originator
    return leg1.first_contact or leg1.originator


# =============================================================================
# 후보 생성
# =============================================================================
@dataclass(frozen=True)
class _Leg:
    swap: SwapRecord
    cls_in: str
    cls_out: str


@dataclass(frozen=True)
class Bucket:
    """정렬된 클래스 쌍 (a, b)에 속한 스왑들. forward = a→b, backward = b→a (시간순)."""

    classes: ClassPair
    pair_class: PairClass
    forward: Tuple[SwapRecord, ...]
    backward: Tuple[SwapRecord, ...]


def _time_key(s: SwapRecord) -> Tuple[int, str, str]:
    return (s.timestamp, s.chain, s.tx_hash)


def build_buckets(
    swaps: Iterable[SwapRecord],
    registry: EquivalenceRegistry,
    report: Optional[DetectReport] = None,
) -> List[Bucket]:
    """
    스왑을 클래스 쌍 버킷으로 나눈다. 매핑되지 않은 자산, 출력 0, 같은 클래스끼리의 교환은 세고 건너뛴다.
    완전히 같은 레코드가 여러 번 있으면 하나만 남긴다.
    """
    rep = report if report is not None else DetectReport()
    seen: Set[SwapRecord] = set()
    legs: Dict[ClassPair, Tuple[List[SwapRecord], List[SwapRecord]]] = {}

    for swap in swaps:
        rep.swaps_in += 1
        if swap in seen:
            rep.duplicates += 1
            continue
        seen.add(swap)

        cls_in = registry.class_of(swap.chain, swap.asset_in)
        cls_out = registry.class_of(swap.chain, swap.asset_out)
        if cls_in is None or cls_out is None:
            rep.unmapped += 1
            if cls_in is None:
                rep.unmapped_assets.add((swap.chain, swap.asset_in))
            if cls_out is None:
                rep.unmapped_assets.add((swap.chain, swap.asset_out))
            continue
        if swap.amount_out == 0:
            rep.zero_output += 1
            continue
        if cls_in == cls_out:
            rep.same_class += 1
            continue

        pair = (cls_in, cls_out) if cls_in < cls_out else (cls_out, cls_in)
        forward, backward = legs.setdefault(pair, ([], []))
        (forward if cls_in == pair[0] else backward).append(swap)

    buckets = [
        Bucket(
            classes=pair,
            pair_class=pair_class_of(registry, *pair),
            forward=tuple(sorted(fwd, key=_time_key)),
            backward=tuple(sorted(bwd, key=_time_key)),
        )
        for pair, (fwd, bwd) in sorted(legs.items())
    ]
    rep.buckets = len(buckets)
    return buckets


def _scan_direction(
    firsts: Sequence[SwapRecord],
    seconds: Sequence[SwapRecord],
    pair_class: PairClass,
    config: DetectorConfig,
) -> List[Candidate]:
    times = [s.timestamp for s in seconds]
    window = config.window_for(pair_class)
    out: List[Candidate] = []
    for leg1 in firsts:
        lo = bisect_left(times, leg1.timestamp - config.clock_skew_tolerance)
        hi = bisect_right(times, leg1.timestamp + window)
        for leg2 in seconds[lo:hi]:
            if leg2.chain == leg1.chain:
                continue
            diff = marginal_difference(leg1, leg2)
            if diff > config.marginal_threshold:
                continue
            out.append(Candidate(leg1, leg2, diff, abs(leg2.timestamp - leg1.timestamp), pair_class))
    return out


def bucket_candidates(bucket: Bucket, config: DetectorConfig) -> List[Candidate]:
    """버킷 하나의 H1-H3 후보 (양 방향을 각각 leg1로 시험)"""
    return _scan_direction(bucket.forward, bucket.backward, bucket.pair_class, config) + _scan_direction(
        bucket.backward, bucket.forward, bucket.pair_class, config
    )


def candidate_order(c: Candidate) -> Tuple[int, str, str, str, str]:
    return (c.leg1.timestamp, c.leg1.tx_hash, c.leg1.chain, c.leg2.tx_hash, c.leg2.chain)


BucketMapper = Callable[[Callable[[Bucket], List[Candidate]], Sequence[Bucket]], List[List[Candidate]]]


def sequential_bucket_mapper(
    fn: Callable[[Bucket], List[Candidate]], buckets: Sequence[Bucket]
) -> List[List[Candidate]]:
    return [fn(b) for b in buckets]


def find_candidates(
    swaps: Iterable[SwapRecord],
    registry: EquivalenceRegistry,
    config: DetectorConfig,
    report: Optional[DetectReport] = None,
    mapper: Optional[BucketMapper] = None,
) -> List[Candidate]:
    """H1-H3을 통과한 모든 (방향이 정해진) 교차 체인 쌍. (t1, 해시) 순으로 정렬된다."""
    rep = report if report is not None else DetectReport()
    buckets = build_buckets(swaps, registry, rep)
    per_bucket = (mapper or sequential_bucket_mapper)(lambda b: bucket_candidates(b, config), buckets)
    candidates = sorted((c for part in per_bucket for c in part), key=candidate_order)
    rep.candidates = len(candidates)
    return candidates


# =============================================================================
# 중복 제거
# =============================================================================
def dedup_level(c: Candidate, config: DetectorConfig) -> int:
    if c.marginal_diff < config.dedup_marginal:
        return 1
    if c.time_gap <= config.dedup_gap_seconds:
        return 2
    return 3


def rank_key(c: Candidate, config: DetectorConfig) -> Tuple[Any, ...]:
    """
    1) 마진 차이 < dedup_marginal 우선  2) 시간 간격 ≤ dedup_gap 우선
    3) 마진 차이 오름차순  4) 시간 간격 오름차순  5) (leg1 해시, leg2 해시) 사전순
    """
    return (
        0 if c.marginal_diff < config.dedup_marginal else 1,
        0 if c.time_gap <= config.dedup_gap_seconds else 1,
        c.marginal_diff,
        c.time_gap,
        c.leg1.tx_hash,
        c.leg1.chain,
        c.leg2.tx_hash,
        c.leg2.chain,
    )


def deduplicate(candidates: Iterable[Candidate], config: DetectorConfig) -> List[ArbMatch]:
    """
    순위대로 훑으면서 두 다리 모두 아직 쓰이지 않은 후보만 받는다.
    각 트랜잭션은 최대 한 번만 매치에 들어간다.
    """
    ranked = sorted(candidates, key=lambda c: rank_key(c, config))
    used: Set[TxKey] = set()
    matches: List[ArbMatch] = []
    for rank, c in enumerate(ranked):
        if c.leg1.key in used or c.leg2.key in used:
            continue
        used.add(c.leg1.key)
        used.add(c.leg2.key)
        matches.append(
            ArbMatch(
                leg1=c.leg1,
                leg2=c.leg2,
                marginal_diff=c.marginal_diff,
                time_gap=c.time_gap,
                pair_class=c.pair_class,
                entity=entity_of(c.leg1, c.leg2),
                dedup_level=dedup_level(c, config),
                dedup_rank=rank,
            )
        )
    return matches


def match_order(m: ArbMatch) -> Tuple[int, str, str, str, str]:
    return (m.leg1.timestamp, m.leg1.tx_hash, m.leg1.chain, m.leg2.tx_hash, m.leg2.chain)


def detect(
    swaps: Iterable[SwapRecord],
    registry: EquivalenceRegistry,
    labels: LabelSet,
    config: DetectorConfig,
    report: Optional[DetectReport] = None,
    mapper: Optional[BucketMapper] = None,
) -> List[ArbMatch]:
    """H1-H4 + 중복 제거. 결과는 (t1, 해시) 순."""
    rep = report if report is not None else DetectReport()
    candidates = find_candidates(swaps, registry, config, rep, mapper)
    linked = [c for c in candidates if entity_link(c.leg1, c.leg2, labels)]
    rep.rejected_h4 = len(candidates) - len(linked)

    matches = sorted(deduplicate(linked, config), key=match_order)
    rep.matches = len(matches)
    rep.dedup_levels.update(m.dedup_level for m in matches)
    return matches


# =============================================================================
# 사후 검증 / 임계값 보정
# =============================================================================
def validate_match(
    match: ArbMatch,
    registry: EquivalenceRegistry,
    labels: LabelSet,
    config: DetectorConfig,
) -> List[str]:
    """매치를 규칙별로 다시 계산한다. 위반 사항 목록 (비어 있으면 정상)."""
    leg1, leg2 = match.leg1, match.leg2
    problems: List[str] = []
    if leg1.chain == leg2.chain:
        problems.append("legs on the same chain")

    classes = [
        registry.class_of(leg1.chain, leg1.asset_in),
        registry.class_of(leg1.chain, leg1.asset_out),
        registry.class_of(leg2.chain, leg2.asset_in),
        registry.class_of(leg2.chain, leg2.asset_out),
    ]
    if any(c is None for c in classes):
        problems.append("unmapped asset")
        return problems
    in1, out1, in2, out2 = classes
    if out1 != in2 or out2 != in1:
        problems.append("H1: assets do not close a loop")

    if leg1.amount_out <= 0:
        problems.append("H2: leg1 output is zero")
    else:
        diff = abs(leg1.amount_out - leg2.amount_in) / leg1.amount_out
        if diff > config.marginal_threshold:
            problems.append(f"H2: marginal difference {diff} > {config.marginal_threshold}")
        if diff != match.marginal_diff:
            problems.append("recorded marginal_diff does not match the legs")

    if in1 is not None and out1 is not None:
        a, b = registry.info(in1), registry.info(out1)
        stable_native = (a.is_stable and b.is_native) or (a.is_native and b.is_stable)
        window = config.window_stable_seconds if stable_native else config.window_other_seconds
        gap = leg2.timestamp - leg1.timestamp
        if gap < -config.clock_skew_tolerance or gap > window:
            problems.append(f"H3: gap {gap}s outside [-{config.clock_skew_tolerance}, {window}]")

    same_eoa = leg1.originator == leg2.originator
    contact = leg1.first_contact
    same_contract = contact is not None and contact == leg2.first_contact and contact not in labels.non_mev
    if not (same_eoa or same_contract):
        problems.append("H4: no shared originator or MEV contract")
    return problems


@dataclass(frozen=True)
class CalibrationRow:
    threshold: Decimal
    candidates: int
    matches: int
    precision: Optional[float]
    recall: Optional[float]


def calibrate_marginal_threshold(
    swaps: Sequence[SwapRecord],
    registry: EquivalenceRegistry,
    labels: LabelSet,
    thresholds: Sequence[Decimal] = (Decimal("0.01"), Decimal("0.005"), Decimal("0.001")),
    truth: Optional[Set[Tuple[TxKey, TxKey]]] = None,
    base: Optional[DetectorConfig] = None,
) -> List[CalibrationRow]:
    """
    H2 상한 후보별 후보 수와 매치 수. truth(정답 (leg1, leg2) 키 집합)가 있으면 정밀도/재현율도 낸다.
    dedup_marginal은 각 상한을 넘지 않도록 맞춘다.
    """
    cfg0 = base or DetectorConfig()
    rows: List[CalibrationRow] = []
    for threshold in thresholds:
        cfg = replace(cfg0, marginal_threshold=threshold, dedup_marginal=min(cfg0.dedup_marginal, threshold))
        report = DetectReport()
        matches = detect(swaps, registry, labels, cfg, report)
        precision = recall = None
        if truth is not None:
            found = {m.key for m in matches}
            hits = len(found & truth)
            precision = hits / len(found) if found else 1.0
            recall = hits / len(truth) if truth else 1.0
        rows.append(CalibrationRow(threshold, report.candidates, len(matches), precision, recall))
    return rows


# =============================================================================
# 직렬화
# =============================================================================
def match_to_dict(m: ArbMatch) -> Dict[str, Any]:
    return {
        "leg1": swap_to_dict(m.leg1),
        "leg2": swap_to_dict(m.leg2),
        "marginal_diff": str(m.marginal_diff),
        "time_gap": m.time_gap,
        "pair_class": m.pair_class.value,
        "entity": m.entity,
        "dedup_level": m.dedup_level,
        "dedup_rank": m.dedup_rank,
    }


def parse_match(obj: Mapping[str, Any]) -> ArbMatch:
    try:
        leg1 = obj["leg1"]
        leg2 = obj["leg2"]
        if not isinstance(leg1, dict) or not isinstance(leg2, dict):
            raise ValueError("legs must be objects")
        return ArbMatch(
            leg1=parse_swap(leg1),
            leg2=parse_swap(leg2),
            marginal_diff=Decimal(str(obj["marginal_diff"])),
            time_gap=int(obj["time_gap"]),
            pair_class=PairClass(obj["pair_class"]),
            entity=str(obj["entity"]).lower(),
            dedup_level=int(obj["dedup_level"]),
            dedup_rank=int(obj["dedup_rank"]),
        )
    except (KeyError, TypeError, ArithmeticError) as e:
        raise ValueError(f"malformed match record: {e}") from e
