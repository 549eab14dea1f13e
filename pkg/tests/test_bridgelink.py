# tests/test_bridgelink.py
import random
from decimal import Decimal

import pytest

from domain.bridgelink import (
    INVENTORY,
    BridgeIndex,
    ClassifiedMatch,
    ExecutionClass,
    ExecutionMethod,
    NativeLinkIndex,
    bridge_share,
    build_bridge_report,
    chain_pair_category,
    classify,
    classify_all,
    load_matches,
    parse_execution,
    write_matches,
)
from domain.chaindata import NativeBridgeLink, TransferRecord
from domain.detector import ArbMatch, PairClass

T1, T2 = 1000, 1700


@pytest.fixture
def match(make_swap):
    leg1 = make_swap("eth", "0xa1", T1, "OMNI", "ETH", "2000", "1")
    leg2 = make_swap("arb", "0xb1", T2, "ETH", "OMNI", "1", "2010")
    return ArbMatch(leg1, leg2, Decimal(0), T2 - T1, PairClass.OTHER, "0xbot", 1, 0)


def link(l1_ts=1010, l2_ts=1650, sender="0xbot", token="0xeth_eth", message_number=1, **kw):
    fields = dict(
        l1_tx=f"0xl1{message_number}", l2_tx=f"0xl2{message_number}", message_number=message_number,
        token=token, amount=Decimal(1), sender=sender, recipient=sender, l1_timestamp=l1_ts,
        l2_timestamp=l2_ts, l1_chain="eth", l2_chain="arb", fee_native=Decimal("0.0002"),
    )
    fields.update(kw)
    return NativeBridgeLink(**fields)


def transfer(chain, tx, ts, token, src, dst, fee=None):
    return TransferRecord(chain, tx, 0, ts, ts, token, src, dst, Decimal(1), fee)


def index(registry, links=(), transfers=()):
    return BridgeIndex.build(links, transfers, registry)


OUT = transfer("eth", "0xout", 1100, "0xeth_eth", "0xbot", "0xbridge", fee=Decimal("0.0001"))
IN = transfer("arb", "0xin", 1262, "0xeth_arb", "0xbridge", "0xbot")


# =============================================================================
# 네이티브 브릿지
# =============================================================================
def test_native_link_between_legs(match, registry):
    execution = classify(match, index(registry, links=[link()]))
    assert execution.method is ExecutionMethod.NATIVE_BRIDGE
    assert execution.bridge_out.tx_hash == "0xl11"
    assert execution.bridge_in.chain == "arb"
    assert execution.bridge_latency_seconds == 640
    assert execution.bridge_fee_native == Decimal("0.0002")
    assert not execution.ambiguous


@pytest.mark.parametrize(
    "bad",
    [
        link(l2_ts=1800),  # leg2 이후 도착
        link(l1_ts=900, l2_ts=1500),  # leg1 이전 출발
        link(token="0xusd_eth"),  # 다른 자산
        link(sender="0xstranger"),  # 관계없는 주소
        link(l2_chain="op"),  # 다른 목적지 체인
    ],
)
def test_native_link_rejected(match, registry, bad):
    assert classify(match, index(registry, links=[bad])) == INVENTORY


def test_earliest_native_link_wins(match, registry):
    links = [link(l1_ts=1200, l2_ts=1600, message_number=2), link(l1_ts=1050, l2_ts=1690, message_number=3)]
    execution = classify(match, index(registry, links=links))
    assert execution.bridge_out.tx_hash == "0xl13"


def test_native_link_through_first_contact(make_swap, registry):
    leg1 = make_swap("eth", "0xa1", T1, "OMNI", "ETH", "2000", "1", originator="0xeoa", first_contact="0xbotc")
    leg2 = make_swap("arb", "0xb1", T2, "ETH", "OMNI", "1", "2010", originator="0xbotc")
    m = ArbMatch(leg1, leg2, Decimal(0), T2 - T1, PairClass.OTHER, "0xbotc", 1, 0)
    assert classify(m, index(registry, links=[link(sender="0xbotc")])).method is ExecutionMethod.NATIVE_BRIDGE


def test_native_link_must_connect_leg_chains(make_swap, registry):
    leg1 = make_swap("arb", "0xa1", T1, "OMNI", "ETH", "2000", "1")
    leg2 = make_swap("op", "0xb1", T2, "ETH", "OMNI", "1", "2010")
    m = ArbMatch(leg1, leg2, Decimal(0), T2 - T1, PairClass.OTHER, "0xbot", 1, 0)
    # 같은 봇의 eth → arb 입금은 arb → op 매치의 브릿지가 아니다
    assert classify(m, index(registry, links=[link()])) == INVENTORY


def test_reverse_direction_links_ignored():
    idx = NativeLinkIndex([link(direction="L2_TO_L1")])
    assert idx.skipped == 1
    assert idx.between("0xbot", 0, 10_000) == []


# =============================================================================
# 토큰 전송 (Multichain)
# =============================================================================
def test_token_transfer_pair(match, registry):
    execution = classify(match, index(registry, transfers=[OUT, IN]))
    assert execution.method is ExecutionMethod.MULTICHAIN_BRIDGE
    assert execution.bridge_out.tx_hash == "0xout"
    assert execution.bridge_in.tx_hash == "0xin"
    assert execution.bridge_latency_seconds == 162
    assert execution.bridge_fee_native == Decimal("0.0001")


def test_latest_incoming_transfer_before_leg2(match, registry):
    late = transfer("arb", "0xin2", 1500, "0xeth_arb", "0xbridge", "0xbot")
    after = transfer("arb", "0xin3", 1800, "0xeth_arb", "0xbridge", "0xbot")
    execution = classify(match, index(registry, transfers=[OUT, IN, late, after]))
    assert execution.bridge_in.tx_hash == "0xin2"


def test_transfer_from_other_sender_ignored(match, registry):
    other = transfer("eth", "0xout", 1100, "0xeth_eth", "0xsomeone", "0xbridge")
    assert classify(match, index(registry, transfers=[other, IN])) == INVENTORY


def test_incoming_transfer_before_outgoing_ignored(match, registry):
    early_in = transfer("arb", "0xin", 1050, "0xeth_arb", "0xbridge", "0xbot")
    assert classify(match, index(registry, transfers=[OUT, early_in])) == INVENTORY


def test_native_takes_precedence_and_flags_ambiguity(match, registry):
    execution = classify(match, index(registry, links=[link()], transfers=[OUT, IN]))
    assert execution.method is ExecutionMethod.NATIVE_BRIDGE
    assert execution.ambiguous


def test_no_bridge_evidence_is_inventory(match, registry):
    execution = classify(match, index(registry))
    assert execution == INVENTORY
    assert not execution.is_bridge
    assert bridge_share(match, execution) is None


def test_classification_ignores_input_order(match, make_swap, registry):
    other = ArbMatch(
        make_swap("eth", "0xa2", 1300, "OMNI", "ETH", "2000", "1"),
        make_swap("arb", "0xb2", 1600, "ETH", "OMNI", "1", "2010"),
        Decimal(0), 300, PairClass.OTHER, "0xbot", 1, 0,
    )
    links = [link(l1_ts=1200, l2_ts=1600, message_number=2), link(l1_ts=1050, l2_ts=1690, message_number=3)]
    transfers = [
        OUT, IN,
        transfer("arb", "0xin2", 1500, "0xeth_arb", "0xbridge", "0xbot"),
        transfer("eth", "0xout2", 1350, "0xeth_eth", "0xbot", "0xbridge"),
        transfer("arb", "0xin3", 1550, "0xeth_arb", "0xbridge", "0xbot"),
    ]
    expected = classify_all([match, other], index(registry, links, transfers))

    rng = random.Random(7)
    for _ in range(10):
        rng.shuffle(links)
        rng.shuffle(transfers)
        assert classify_all([match, other], index(registry, links, transfers)) == expected
        assert classify_all([other, match], index(registry, links, transfers)) == expected[::-1]


# =============================================================================
# 보고서
# =============================================================================
def test_bridge_share_of_settlement(match, registry):
    execution = classify(match, index(registry, links=[link()]))
    assert bridge_share(match, execution) == pytest.approx(640 / 700)


def test_chain_pair_category(chains):
    assert chain_pair_category(chains, "eth", "arb") == "L1-L2"
    assert chain_pair_category(chains, "op", "arb") == "L2-L2"
    assert chain_pair_category(chains, "eth", "zk") == "?-L1"


def test_bridge_report(match, registry, chains):
    native = classify(match, index(registry, links=[link()]))
    rows = [ClassifiedMatch(match, native), ClassifiedMatch(match, INVENTORY)]
    data = build_bridge_report(rows, chains).to_dict()
    assert data["total"] == 2
    assert data["counts"] == {"Inventory": 1, "NativeBridge": 1, "MultichainBridge": 0}
    assert data["shares"]["NativeBridge"] == 0.5
    assert data["by_chain_pair"]["L1-L2"]["count"] == 2
    assert data["mean_bridge_latency_seconds"] == {"NativeBridge": 640.0}


# =============================================================================
# 직렬화
# =============================================================================
def test_parse_execution_requires_bridge_fields():
    with pytest.raises(ValueError):
        parse_execution({"method": "NativeBridge", "bridge_out": None, "bridge_in": None})
    with pytest.raises(ValueError):
        parse_execution(
            {
                "method": "Inventory",
                "bridge_out": {"chain": "eth", "tx_hash": "0x1", "timestamp": 1},
                "bridge_in": {"chain": "arb", "tx_hash": "0x2", "timestamp": 2},
            }
        )


def test_matches_file_keeps_execution(tmp_path, match, registry):
    classified = classify_all([match], index(registry, transfers=[OUT, IN]))
    path = tmp_path / "matches.jsonl"
    write_matches(path, classified)
    assert list(load_matches(path, strict=True)) == classified


def test_execution_class_default_is_inventory():
    assert ExecutionClass(ExecutionMethod.INVENTORY) == INVENTORY
