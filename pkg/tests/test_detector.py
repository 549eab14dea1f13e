# tests/test_detector.py
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from decimal import Decimal

import pytest

from core.exceptions import ConfigError
from domain.detector import (
    DetectorConfig,
    DetectReport,
    PairClass,
    build_buckets,
    calibrate_marginal_threshold,
    detect,
    entity_link,
    entity_of,
    find_candidates,
    match_to_dict,
    parse_match,
    validate_match,
)
from tests.conftest import ROUTER
from tests.oracle_matcher import oracle_matches

CONFIG = DetectorConfig()


def arb_pair(make_swap, t1=100, gap=60, out1="1000", in2="996", tx1="0xa1", tx2="0xb1", **leg2_overrides):
    """eth에서 ETH→OMNI, arb에서 OMNI→ETH (Other 쌍, 창 3600 s)"""
    leg1 = make_swap("eth", tx1, t1, "ETH", "OMNI", "1", out1)
    leg2 = make_swap("arb", tx2, t1 + gap, "OMNI", "ETH", in2, "1.01", **leg2_overrides)
    return leg1, leg2


# =============================================================================
# 설정
# =============================================================================
def test_config_defaults():
    assert CONFIG.marginal_threshold == Decimal("0.005")
    assert CONFIG.dedup_marginal == Decimal("0.001")
    assert CONFIG.dedup_gap_seconds == 240
    assert CONFIG.window_for(PairClass.STABLECOIN_NATIVE) == 12
    assert CONFIG.window_for(PairClass.OTHER) == 3600


@pytest.mark.parametrize(
    "kwargs",
    [
        {"marginal_threshold": Decimal("0.001"), "dedup_marginal": Decimal("0.002")},
        {"dedup_marginal": Decimal("0")},
        {"window_stable_seconds": 0},
        {"clock_skew_tolerance": -1},
    ],
)
def test_config_rejects_inconsistent_values(kwargs):
    with pytest.raises(ConfigError):
        DetectorConfig(**kwargs)


# =============================================================================
# H1-H4
# =============================================================================
def test_marginal_difference_within_threshold_matches(make_swap, registry, labels):
    leg1, leg2 = arb_pair(make_swap)
    [match] = detect([leg1, leg2], registry, labels, CONFIG)
    assert match.leg1 == leg1
    assert match.leg2 == leg2
    assert match.marginal_diff == Decimal("0.004")
    assert match.pair_class is PairClass.OTHER
    assert match.settlement_seconds == 60
    assert match.dedup_level == 2
    assert match.entity == "0xbot"


def test_marginal_difference_above_threshold_rejected(make_swap, registry, labels):
    assert detect(list(arb_pair(make_swap, in2="994")), registry, labels, CONFIG) == []


def test_stablecoin_native_window(make_swap, registry, labels):
    leg1 = make_swap("eth", "0xa1", 1000, "USD", "ETH", "2000", "1")
    late = make_swap("arb", "0xb1", 1030, "ETH", "USD", "1", "2010")
    assert detect([leg1, late], registry, labels, CONFIG) == []

    soon = make_swap("arb", "0xb2", 1010, "ETH", "USD", "1", "2010")
    [match] = detect([leg1, soon], registry, labels, CONFIG)
    assert match.pair_class is PairClass.STABLECOIN_NATIVE


def test_leg2_before_leg1_needs_skew_tolerance(make_swap, registry, labels):
    leg1, leg2 = arb_pair(make_swap, gap=-5)
    assert detect([leg1, leg2], registry, labels, CONFIG) == []
    [match] = detect([leg1, leg2], registry, labels, replace(CONFIG, clock_skew_tolerance=10))
    assert match.time_gap == 5


def test_same_chain_pairs_ignored(make_swap, registry, labels):
    leg1 = make_swap("eth", "0xa1", 100, "ETH", "OMNI", "1", "1000")
    leg2 = make_swap("eth", "0xa2", 110, "OMNI", "ETH", "1000", "1.01")
    assert detect([leg1, leg2], registry, labels, CONFIG) == []


def test_shared_mev_contract_links_different_senders(make_swap, registry, labels):
    leg1, leg2 = arb_pair(make_swap, originator="0xe2", first_contact="0xmev")
    leg1 = replace(leg1, originator="0xe1", first_contact="0xmev")
    [match] = detect([leg1, leg2], registry, labels, CONFIG)
    assert match.entity == "0xmev"


def test_shared_non_mev_contract_does_not_link(make_swap, registry, labels):
    leg1, leg2 = arb_pair(make_swap, originator="0xe2", first_contact=ROUTER)
    leg1 = replace(leg1, originator="0xe1", first_contact=ROUTER)
    report = DetectReport()
    assert detect([leg1, leg2], registry, labels, CONFIG, report) == []
    assert report.candidates == 1
    assert report.rejected_h4 == 1


def test_entity_link_rules(make_swap, labels):
    a = make_swap("eth", "0x1", 0, "ETH", "OMNI", "1", "1", originator="0xe1", first_contact=None)
    b = make_swap("arb", "0x2", 0, "OMNI", "ETH", "1", "1", originator="0xe2", first_contact=None)
    assert not entity_link(a, b, labels)
    assert entity_link(a, replace(b, originator="0xe1"), labels)
    assert entity_link(replace(a, first_contact="0xc"), replace(b, first_contact="0xc"), labels)
    assert entity_of(replace(a, first_contact="0xc"), replace(b, first_contact="0xc")) == "0xc"


# =============================================================================
# 중복 제거
# =============================================================================
def test_smaller_marginal_difference_wins(make_swap, registry, labels):
    leg1, tight = arb_pair(make_swap, gap=500, in2="999.5", tx2="0xb1")
    _, loose = arb_pair(make_swap, gap=100, in2="997", tx2="0xb2")
    [match] = detect([leg1, tight, loose], registry, labels, CONFIG)
    assert match.leg2 == tight
    assert match.dedup_level == 1


def test_shorter_gap_wins_at_equal_level(make_swap, registry, labels):
    leg1, near = arb_pair(make_swap, gap=100, in2="997", tx2="0xb1")
    _, far = arb_pair(make_swap, gap=500, in2="997", tx2="0xb2")
    [match] = detect([leg1, far, near], registry, labels, CONFIG)
    assert match.leg2 == near


def test_full_tie_broken_by_tx_hash(make_swap, registry, labels):
    leg1, second = arb_pair(make_swap, in2="997", tx2="0xb2")
    _, first = arb_pair(make_swap, in2="997", tx2="0xb1")
    [match] = detect([leg1, second, first], registry, labels, CONFIG)
    assert match.leg2.tx_hash == "0xb1"


def test_each_transaction_used_once(make_swap, registry, labels):
    leg1a, leg2a = arb_pair(make_swap, t1=100, tx1="0xa1", tx2="0xb1")
    leg1b, _ = arb_pair(make_swap, t1=110, tx1="0xa2")
    matches = detect([leg1a, leg1b, leg2a], registry, labels, CONFIG)
    assert len(matches) == 1
    keys = [k for m in matches for k in (m.leg1.key, m.leg2.key)]
    assert len(keys) == len(set(keys))


# =============================================================================
# 보고서 / 버킷
# =============================================================================
def test_build_buckets_counts_skipped_swaps(make_swap, registry):
    good = make_swap("eth", "0x1", 0, "ETH", "OMNI", "1", "1000")
    unmapped = make_swap("eth", "0x2", 0, "ETH", "OMNI", "1", "1000", asset_out="0xunknown")
    zero = make_swap("eth", "0x3", 0, "ETH", "OMNI", "1", "0")
    same = make_swap("eth", "0x4", 0, "USD", "USD", "1", "1")
    report = DetectReport()
    [bucket] = build_buckets([good, good, unmapped, zero, same], registry, report)
    assert bucket.classes == ("ETH", "OMNI")
    assert bucket.forward == (good,)
    assert bucket.backward == ()
    assert (report.swaps_in, report.duplicates, report.unmapped, report.zero_output, report.same_class) == (
        5, 1, 1, 1, 1,
    )
    assert report.unmapped_assets == {("eth", "0xunknown")}


def test_report_counts_dedup_levels(make_swap, registry, labels):
    leg1, leg2 = arb_pair(make_swap)
    report = DetectReport()
    detect([leg1, leg2], registry, labels, CONFIG, report)
    data = report.to_dict()
    assert data["matches"] == 1
    assert data["dedup_levels"] == {"1": 0, "2": 1, "3": 0}


# =============================================================================
# 무작위 입력 성질
# =============================================================================
def random_swaps(seed, n=150):
    rng = random.Random(seed)
    amounts = ["1000", "999", "997", "1004", "1000.5", "990"]
    classes = ["ETH", "USD", "OMNI"]
    swaps = []
    for i in range(n):
        cls_in, cls_out = rng.sample(classes, 2)
        chain = rng.choice(["eth", "arb", "op"])
        swaps.append(
            dict(
                chain=chain,
                tx_hash=f"0x{i:04x}",
                timestamp=rng.randrange(0, 900),
                cls_in=cls_in,
                cls_out=cls_out,
                amount_in=rng.choice(amounts),
                amount_out=rng.choice(amounts),
                originator=rng.choice(["0xe1", "0xe2", "0xe3"]),
                first_contact=rng.choice([None, "0xc1", ROUTER]),
            )
        )
    return swaps


def build_random(make_swap, seed):
    out = []
    for s in random_swaps(seed):
        out.append(
            make_swap(
                s["chain"], s["tx_hash"], s["timestamp"], s["cls_in"], s["cls_out"], s["amount_in"],
                s["amount_out"], originator=s["originator"], first_contact=s["first_contact"],
            )
        )
    # 완전히 같은 레코드 몇 개
    return out + out[:5]


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_detect_agrees_with_brute_force(make_swap, registry, labels, seed):
    swaps = build_random(make_swap, seed)
    matches = detect(swaps, registry, labels, CONFIG)
    assert matches
    assert {m.key for m in matches} == oracle_matches(swaps, registry, labels, CONFIG)


def test_detect_is_permutation_invariant(make_swap, registry, labels):
    swaps = build_random(make_swap, 4)
    expected = detect(swaps, registry, labels, CONFIG)
    shuffled = list(swaps)
    random.Random(99).shuffle(shuffled)
    assert detect(shuffled, registry, labels, CONFIG) == expected


def test_detected_matches_validate(make_swap, registry, labels):
    matches = detect(build_random(make_swap, 5), registry, labels, CONFIG)
    assert all(validate_match(m, registry, labels, CONFIG) == [] for m in matches)
    tampered = replace(matches[0], marginal_diff=Decimal("0.0000001"))
    assert "recorded marginal_diff does not match the legs" in validate_match(tampered, registry, labels, CONFIG)


def test_candidates_grow_with_threshold(make_swap, registry):
    swaps = build_random(make_swap, 6)
    counts = [
        len(find_candidates(swaps, registry, DetectorConfig(marginal_threshold=t, dedup_marginal=Decimal("0.0005"))))
        for t in (Decimal("0.001"), Decimal("0.005"), Decimal("0.02"))
    ]
    assert counts == sorted(counts)
    assert counts[0] < counts[-1]


def test_threaded_bucket_mapper_gives_same_matches(make_swap, registry, labels):
    swaps = build_random(make_swap, 7)

    def mapper(fn, buckets):
        with ThreadPoolExecutor(max_workers=3) as pool:
            return list(pool.map(fn, buckets))

    assert detect(swaps, registry, labels, CONFIG, mapper=mapper) == detect(swaps, registry, labels, CONFIG)


# =============================================================================
# 보정 / 직렬화
# =============================================================================
def test_calibration_table(make_swap, registry, labels):
    good = arb_pair(make_swap, t1=100, in2="996", tx1="0xa1", tx2="0xb1")
    wide = arb_pair(make_swap, t1=10_000, in2="992", tx1="0xa2", tx2="0xb2")
    truth = {(good[0].key, good[1].key)}
    rows = calibrate_marginal_threshold([*good, *wide], registry, labels, truth=truth)
    assert [r.candidates for r in rows] == [2, 1, 0]
    assert [r.matches for r in rows] == [2, 1, 0]
    assert [r.precision for r in rows] == [0.5, 1.0, 1.0]
    assert [r.recall for r in rows] == [1.0, 1.0, 0.0]


def test_match_record_parses_back(make_swap, registry, labels):
    [match] = detect(list(arb_pair(make_swap)), registry, labels, CONFIG)
    assert parse_match(match_to_dict(match)) == match
