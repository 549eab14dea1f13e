# tests/conftest.py
"""공용 픽스처: 새 이벤트 버스, 작은 레지스트리, 스왑 팩토리"""
from __future__ import annotations

from decimal import Decimal
from typing import Any, Callable, Iterator

import pytest

from core.events.simple_bus import SimpleEventBus
from domain.chaindata import ChainDirectory, ChainInfo, EquivalenceRegistry, LabelSet, SwapRecord
from utilities.logger import Logger

CHAINS = ("eth", "arb", "op")
ROUTER = "0xrouter"

SwapFactory = Callable[..., SwapRecord]


def token(chain: str, cls: str) -> str:
    return f"0x{cls.lower()}_{chain}"


@pytest.fixture(autouse=True)
def _reset_logger() -> Iterator[None]:
    yield
    Logger.reset()


@pytest.fixture
def bus() -> SimpleEventBus:
    return SimpleEventBus()


@pytest.fixture
def registry() -> EquivalenceRegistry:
    reg = EquivalenceRegistry()
    for chain in CHAINS:
        reg.add(chain, token(chain, "ETH"), "ETH", is_stable=False, is_native=True)
        reg.add(chain, token(chain, "USD"), "USD", is_stable=True, is_native=False)
        reg.add(chain, token(chain, "OMNI"), "OMNI", is_stable=False, is_native=False)
    return reg


@pytest.fixture
def labels() -> LabelSet:
    ls = LabelSet()
    ls.add(ROUTER, "non_mev")
    return ls


@pytest.fixture
def chains() -> ChainDirectory:
    return ChainDirectory(
        [
            ChainInfo("eth", "L1", 12, "ETH"),
            ChainInfo("arb", "L2", 1, "ETH"),
            ChainInfo("op", "L2", 2, "ETH"),
        ]
    )


@pytest.fixture
def make_swap() -> SwapFactory:
    """
    make_swap("eth", "0xa1", 100, "USD", "ETH", "2000", "1") 형태로 스왑을 만든다.
    나머지 필드는 키워드로 덮어쓴다.
    """

    def factory(
        chain: str,
        tx_hash: str,
        timestamp: int,
        cls_in: str,
        cls_out: str,
        amount_in: Any,
        amount_out: Any,
        **overrides: Any,
    ) -> SwapRecord:
        fields: dict[str, Any] = {
            "chain": chain,
            "tx_hash": tx_hash,
            "block": timestamp,
            "timestamp": timestamp,
            "originator": "0xbot",
            "first_contact": None,
            "asset_in": token(chain, cls_in),
            "asset_out": token(chain, cls_out),
            "amount_in": Decimal(str(amount_in)),
            "amount_out": Decimal(str(amount_out)),
            "gas_fee_native": Decimal("0.001"),
            "coinbase_tip_native": Decimal("0"),
        }
        fields.update(overrides)
        return SwapRecord(**fields)

    return factory
