# domain/scenario.py
"""
[합성 멀티체인 시나리오 생성기]

체인, CPMM 풀, 클래스별 USD GBM 가격, 차익거래 에이전트(Inventory / BridgeNative / BridgeMultichain),
브릿지 지연, 노이즈 트레이더를 시뮬레이션해서 chaindata 형식의 이벤트 파일과 정답(truth)을 만든다.

시간 흐름:
    노이즈 거래와 차익 기회는 (시각, 순번) 힙에서 시간 순으로 꺼낸다.
    차익 기회가 오면 두 풀을 기준 가격 / 기준 가격 × p 로 맞추고, 두 다리를 풀 복사본으로 미리 계산한다.
    다음 조건을 모두 통과해야 실제 풀에 반영하고 이벤트를 낸다 (아니면 사유별로 센다):
        busy       에이전트의 이전 차익거래가 아직 끝나지 않음
        latency    Inventory 두 다리 간격이 반응 지연을 넘음
        h3_window  두 다리 간격이 쌍 종류의 탐지 창을 넘음
        collision  같은 엔티티의 이전 다리와 H1-H3 교차 매치가 생김
        dust       양자화 후 금액이 0

타임스탬프는 정수 초이며 각 체인의 블록 격자로 올림한다. 금액은 1e-10 단위로 내림한 Decimal.
"""
from __future__ import annotations

import copy
import hashlib
import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.stats import norm

from core.exceptions import ConfigError
from domain.chaindata import (
    ChainDirectory,
    ChainInfo,
    EquivalenceRegistry,
    LabelSet,
    NativeBridgeLink,
    PriceTable,
    SwapRecord,
    TransferRecord,
    TxKey,
    hour_bucket,
    iter_jsonl,
    write_chains,
    write_equivalence,
    write_jsonl,
    write_labels,
    write_native_links,
    write_prices,
    write_swaps,
    write_transfers,
)
from domain.detector import DetectorConfig, PairClass, marginal_difference
from domain.stochastic import CpmmPool, GbmPath, gbm_sample, make_rng
from utilities.file_handler import load_json, save_json

SCENARIO_SCHEMA_VERSION = 1
DAY = 86_400.0
PRICE_STEP_SECONDS = 60.0
AMOUNT_QUANTUM = Decimal("1e-10")
MAX_BRIDGE_FEE = 0.005
DEFAULT_START_TIME = 1_700_000_000

# 하위 스트림 번호 (make_rng의 stream)
_STREAM_NOISE = 1
_STREAM_FEES = 2
_STREAM_DECOYS = 3
_STREAM_AGENT_BASE = 100

# 시나리오 파일 이름
SWAPS_FILE = "swaps.jsonl"
TRANSFERS_FILE = "transfers.jsonl"
NATIVE_LINKS_FILE = "native_links.jsonl"
PRICES_FILE = "prices.csv"
EQUIVALENCE_FILE = "equivalence.csv"
LABELS_FILE = "labels.csv"
CHAINS_FILE = "chains.csv"
TRUTH_FILE = "truth.jsonl"
SCENARIO_REPORT_FILE = "scenario_report.json"


class AgentStrategy(str, Enum):
    INVENTORY = "Inventory"
    BRIDGE_NATIVE = "BridgeNative"
    BRIDGE_MULTICHAIN = "BridgeMultichain"


class BridgeKind(str, Enum):
    NATIVE = "Native"
    MULTICHAIN = "Multichain"


# 전략 → bridgelink가 내야 할 실행 방식 이름
EXPECTED_METHOD = {
    AgentStrategy.INVENTORY: "Inventory",
    AgentStrategy.BRIDGE_NATIVE: "NativeBridge",
    AgentStrategy.BRIDGE_MULTICHAIN: "MultichainBridge",
}


# =============================================================================
# 설정
# =============================================================================
@dataclass(frozen=True)
class ChainSpec:
    id: str
    block_time: int
    layer: str = "L2"
    native_class: str = "ETH"
    gas_fee: float = 0.0005


@dataclass(frozen=True)
class ClassSpec:
    """동등 클래스와 그 USD 가격 GBM (μ, σ는 하루 단위)"""

    name: str
    usd0: float
    mu: float = 0.0
    sigma: float = 0.0
    is_stable: bool = False
    is_native: bool = False


@dataclass(frozen=True)
class PoolSpec:
    chain: str
    class_a: str
    class_b: str
    reserve_a: float
    reserve_b: float


@dataclass(frozen=True)
class AgentSpec:
    """
    src 체인에서 pair[0] → pair[1], dst 체인에서 pair[1] → pair[0].
    opportunity_rate는 시간당 기회 수, gap_range는 가격비 p − 1 의 균등 범위.
    contract가 있으면 두 다리가 그 컨트랙트를 거치고 originator는 다리마다 따로 만든다 (Inventory 전용).
    """

    address: str
    strategy: AgentStrategy
    source: str
    destination: str
    pair: Tuple[str, str]
    capital: float
    latency: int
    opportunity_rate: float = 4.0
    gap_range: Tuple[float, float] = (0.01, 0.03)
    contract: Optional[str] = None
    tip: float = 0.0


@dataclass(frozen=True)
class BridgeSpec:
    """지연은 (중앙값, 75분위수)에 맞춘 로그정규. fee는 옮기는 금액에서 떼는 비율."""

    kind: BridgeKind
    source: str
    destination: str
    latency_median: float
    latency_p75: float
    fee: float = 0.0
    gas_fee: float = 0.0005

    @property
    def log_sigma(self) -> float:
        return math.log(self.latency_p75 / self.latency_median) / float(norm.ppf(0.75))


@dataclass(frozen=True)
class NoiseSpec:
    rate: float = 0.0
    size_log_mean: float = 6.0
    size_log_sigma: float = 1.0


@dataclass(frozen=True)
class Scenario:
    chains: Tuple[ChainSpec, ...]
    classes: Tuple[ClassSpec, ...]
    pools: Tuple[PoolSpec, ...]
    arbitrageurs: Tuple[AgentSpec, ...]
    bridges: Tuple[BridgeSpec, ...] = ()
    noise: NoiseSpec = NoiseSpec()
    horizon: int = 3600
    seed: int = 0
    start_time: int = DEFAULT_START_TIME
    collision_rate: float = 0.0

    def __post_init__(self) -> None:
        validate_scenario(self)

    def chain(self, chain_id: str) -> ChainSpec:
        for c in self.chains:
            if c.id == chain_id:
                return c
        raise ConfigError(f"unknown chain {chain_id!r}")

    def class_spec(self, name: str) -> ClassSpec:
        for c in self.classes:
            if c.name == name:
                return c
        raise ConfigError(f"unknown class {name!r}")

    def pool_index(self, chain: str, pair: Tuple[str, str]) -> Optional[int]:
        for i, pool in enumerate(self.pools):
            if pool.chain == chain and {pool.class_a, pool.class_b} == set(pair):
                return i
        return None

    def bridge_for(self, agent: AgentSpec) -> Optional[BridgeSpec]:
        kind = BridgeKind.NATIVE if agent.strategy is AgentStrategy.BRIDGE_NATIVE else BridgeKind.MULTICHAIN
        for b in self.bridges:
            if b.kind is kind and b.source == agent.source and b.destination == agent.destination:
                return b
        return None


def validate_scenario(s: Scenario) -> None:
    """설정 오류는 모두 ConfigError (첫 번째 위반만 보고)"""
    if len(s.chains) < 2:
        raise ConfigError("a scenario needs at least 2 chains")
    ids = [c.id for c in s.chains]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate chain id")
    names = {c.name for c in s.classes}
    if len(names) != len(s.classes):
        raise ConfigError("duplicate class name")
    if s.horizon < PRICE_STEP_SECONDS:
        raise ConfigError(f"horizon must be >= {PRICE_STEP_SECONDS:.0f} seconds")
    if not 0.0 <= s.collision_rate <= 1.0:
        raise ConfigError("collision_rate must be in [0, 1]")

    for c in s.chains:
        if c.block_time <= 0:
            raise ConfigError(f"chain {c.id}: block_time must be > 0")
        if c.layer not in ("L1", "L2"):
            raise ConfigError(f"chain {c.id}: layer must be L1 or L2")
        if c.native_class not in names:
            raise ConfigError(f"chain {c.id}: native class {c.native_class!r} is not declared")
        if c.gas_fee < 0:
            raise ConfigError(f"chain {c.id}: gas_fee must be >= 0")
    for cls in s.classes:
        if cls.usd0 <= 0 or cls.sigma < 0 or not all(map(math.isfinite, (cls.usd0, cls.mu, cls.sigma))):
            raise ConfigError(f"class {cls.name}: need usd0 > 0, sigma >= 0")
    for pool in s.pools:
        s.chain(pool.chain)
        if pool.class_a not in names or pool.class_b not in names or pool.class_a == pool.class_b:
            raise ConfigError(f"pool on {pool.chain}: bad class pair ({pool.class_a}, {pool.class_b})")
        if pool.reserve_a <= 0 or pool.reserve_b <= 0:
            raise ConfigError(f"pool on {pool.chain}: reserves must be > 0")
    for b in s.bridges:
        src, dst = s.chain(b.source), s.chain(b.destination)
        if b.source == b.destination:
            raise ConfigError("bridge endpoints must differ")
        if not 0 < b.latency_median <= b.latency_p75:
            raise ConfigError(f"bridge {b.source}->{b.destination}: need 0 < latency_median <= latency_p75")
        if not 0.0 <= b.fee <= MAX_BRIDGE_FEE:
            raise ConfigError(f"bridge fee must be in [0, {MAX_BRIDGE_FEE}]")
        if b.gas_fee < 0:
            raise ConfigError("bridge gas_fee must be >= 0")
        if b.kind is BridgeKind.NATIVE and (src.layer, dst.layer) != ("L1", "L2"):
            raise ConfigError(f"native bridge {b.source}->{b.destination} must go from L1 to L2")

    addresses: Set[str] = set()
    for a in s.arbitrageurs:
        if a.address in addresses or (a.contract is not None and a.contract in addresses):
            raise ConfigError(f"agent address {a.address} is not unique")
        addresses.add(a.address)
        if a.contract is not None:
            addresses.add(a.contract)
            if a.strategy is not AgentStrategy.INVENTORY:
                raise ConfigError(f"agent {a.address}: contract execution is only modelled for Inventory agents")
        if a.source == a.destination:
            raise ConfigError(f"agent {a.address}: source and destination chains must differ")
        if a.capital <= 0 or a.latency < 0 or a.opportunity_rate < 0:
            raise ConfigError(f"agent {a.address}: need capital > 0, latency >= 0, opportunity_rate >= 0")
        lo, hi = a.gap_range
        if not 0 < lo <= hi:
            raise ConfigError(f"agent {a.address}: gap_range must satisfy 0 < lo <= hi")
        for chain in (a.source, a.destination):
            if s.pool_index(chain, a.pair) is None:
                raise ConfigError(f"agent {a.address}: no pool for {a.pair[0]}/{a.pair[1]} on {chain}")
        if a.strategy is not AgentStrategy.INVENTORY and s.bridge_for(a) is None:
            raise ConfigError(f"agent {a.address}: no {a.strategy.value} bridge {a.source}->{a.destination}")
    if s.noise.rate < 0 or s.noise.size_log_sigma < 0:
        raise ConfigError("noise rate and size_log_sigma must be >= 0")
    if s.noise.rate > 0 and not s.pools:
        raise ConfigError("noise trading needs at least one pool")


def _section(obj: Mapping[str, Any], name: str) -> List[Mapping[str, Any]]:
    items = obj.get(name, [])
    if not isinstance(items, list) or not all(isinstance(x, dict) for x in items):
        raise ConfigError(f"{name} must be a list of objects")
    return list(items)


def parse_scenario(obj: Mapping[str, Any]) -> Scenario:
    version = obj.get("schema_version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise ConfigError(f"unsupported scenario schema_version {version!r}")
    try:
        chains = tuple(
            ChainSpec(
                id=str(c["id"]),
                block_time=int(c["block_time"]),
                layer=str(c.get("layer", "L2")),
                native_class=str(c.get("native_class", "ETH")),
                gas_fee=float(c.get("gas_fee", 0.0005)),
            )
            for c in _section(obj, "chains")
        )
        classes = tuple(
            ClassSpec(
                name=str(c["name"]),
                usd0=float(c["usd0"]),
                mu=float(c.get("mu", 0.0)),
                sigma=float(c.get("sigma", 0.0)),
                is_stable=bool(c.get("is_stable", False)),
                is_native=bool(c.get("is_native", False)),
            )
            for c in _section(obj, "classes")
        )
        pools = tuple(
            PoolSpec(
                chain=str(p["chain"]),
                class_a=str(p["class_a"]),
                class_b=str(p["class_b"]),
                reserve_a=float(p["reserve_a"]),
                reserve_b=float(p["reserve_b"]),
            )
            for p in _section(obj, "pools")
        )
        agents = tuple(
            AgentSpec(
                address=str(a["address"]).lower(),
                strategy=AgentStrategy(a["strategy"]),
                source=str(a["source"]),
                destination=str(a["destination"]),
                pair=(str(a["pair"][0]), str(a["pair"][1])),
                capital=float(a["capital"]),
                latency=int(a["latency"]),
                opportunity_rate=float(a.get("opportunity_rate", 4.0)),
                gap_range=(float(a.get("gap_range", (0.01, 0.03))[0]), float(a.get("gap_range", (0.01, 0.03))[1])),
                contract=str(a["contract"]).lower() if a.get("contract") else None,
                tip=float(a.get("tip", 0.0)),
            )
            for a in _section(obj, "arbitrageurs")
        )
        bridges = tuple(
            BridgeSpec(
                kind=BridgeKind(b["kind"]),
                source=str(b["source"]),
                destination=str(b["destination"]),
                latency_median=float(b["latency_median"]),
                latency_p75=float(b.get("latency_p75", b["latency_median"])),
                fee=float(b.get("fee", 0.0)),
                gas_fee=float(b.get("gas_fee", 0.0005)),
            )
            for b in _section(obj, "bridges")
        )
        noise_obj = obj.get("noise", {})
        if not isinstance(noise_obj, dict):
            raise ConfigError("noise must be an object")
        noise = NoiseSpec(
            rate=float(noise_obj.get("rate", 0.0)),
            size_log_mean=float(noise_obj.get("size_log_mean", 6.0)),
            size_log_sigma=float(noise_obj.get("size_log_sigma", 1.0)),
        )
        return Scenario(
            chains=chains,
            classes=classes,
            pools=pools,
            arbitrageurs=agents,
            bridges=bridges,
            noise=noise,
            horizon=int(obj.get("horizon", 3600)),
            seed=int(obj.get("seed", 0)),
            start_time=int(obj.get("start_time", DEFAULT_START_TIME)),
            collision_rate=float(obj.get("collision_rate", 0.0)),
        )
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid scenario: {e}") from e


def load_scenario(path: Path) -> Scenario:
    obj = load_json(path)
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    return parse_scenario(obj)


# =============================================================================
# 결과
# =============================================================================
@dataclass(frozen=True)
class PlantedArbitrage:
    leg1: TxKey
    leg2: TxKey
    strategy: AgentStrategy
    entity: str
    bridge_txs: Tuple[TxKey, ...] = ()
    true_profit_usd: Optional[float] = None
    gap_seconds: int = 0
    bridge_latency: Optional[int] = None

    @property
    def expected_method(self) -> str:
        return EXPECTED_METHOD[self.strategy]


def truth_to_dict(t: PlantedArbitrage) -> Dict[str, Any]:
    def ref(key: TxKey) -> Dict[str, str]:
        return {"chain": key[0], "tx_hash": key[1]}

    return {
        "leg1": ref(t.leg1),
        "leg2": ref(t.leg2),
        "strategy": t.strategy.value,
        "entity": t.entity,
        "bridge_txs": [ref(k) for k in t.bridge_txs],
        "true_profit_usd": t.true_profit_usd,
        "gap_seconds": t.gap_seconds,
        "bridge_latency": t.bridge_latency,
    }


def parse_truth(obj: Mapping[str, Any]) -> PlantedArbitrage:
    def key(ref: Any) -> TxKey:
        if not isinstance(ref, dict):
            raise ValueError("tx reference must be an object")
        return (str(ref["chain"]), str(ref["tx_hash"]).lower())

    try:
        profit = obj.get("true_profit_usd")
        latency = obj.get("bridge_latency")
        return PlantedArbitrage(
            leg1=key(obj["leg1"]),
            leg2=key(obj["leg2"]),
            strategy=AgentStrategy(obj["strategy"]),
            entity=str(obj["entity"]).lower(),
            bridge_txs=tuple(key(r) for r in obj.get("bridge_txs", [])),
            true_profit_usd=None if profit is None else float(profit),
            gap_seconds=int(obj.get("gap_seconds", 0)),
            bridge_latency=None if latency is None else int(latency),
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed truth record: {e}") from e


def load_truth(path: Path, strict: bool = False) -> List[PlantedArbitrage]:
    return list(iter_jsonl(path, "truth", parse_truth, strict))


@dataclass
class ScenarioReport:
    opportunities: int = 0
    planted: Counter[str] = field(default_factory=lambda: Counter[str]())
    refused: Counter[str] = field(default_factory=lambda: Counter[str]())
    noise_swaps: int = 0
    decoy_swaps: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "opportunities": self.opportunities,
            "planted": dict(sorted(self.planted.items())),
            "planted_total": sum(self.planted.values()),
            "refused": dict(sorted(self.refused.items())),
            "noise_swaps": self.noise_swaps,
            "decoy_swaps": self.decoy_swaps,
        }


@dataclass
class ScenarioOutput:
    swaps: List[SwapRecord]
    transfers: List[TransferRecord]
    native_links: List[NativeBridgeLink]
    prices: PriceTable
    registry: EquivalenceRegistry
    labels: LabelSet
    chains: ChainDirectory
    truth: List[PlantedArbitrage]
    report: ScenarioReport


# =============================================================================
# 보조
# =============================================================================
def _digest(*parts: Any) -> str:
    return hashlib.sha256(":".join(str(p) for p in parts).encode()).hexdigest()


def derive_address(*parts: Any) -> str:
    return "0x" + _digest("address", *parts)[:40]


def asset_address(chain: str, cls: str) -> str:
    return derive_address("asset", chain, cls)


def router_address(chain: str) -> str:
    return derive_address("router", chain)


def bridge_contract(kind: BridgeKind, chain: str) -> str:
    return derive_address("bridge", kind.value, chain)


def to_amount(x: float) -> Decimal:
    """float 금액 → 1e-10 단위로 내림한 Decimal"""
    return Decimal(x).quantize(AMOUNT_QUANTUM, rounding=ROUND_DOWN)


def snap_to_block(timestamp: int, block_time: int) -> int:
    """다음 블록 경계로 올림"""
    return -(-timestamp // block_time) * block_time


@dataclass
class _Event:
    ts: float
    kind: str
    index: int


class EventQueue:
    """(시각, 순번) 순서의 이벤트 힙"""

    def __init__(self) -> None:
        self._heap: List[Tuple[float, int, _Event]] = []
        self._seq = 0

    def push(self, event: _Event) -> None:
        heapq.heappush(self._heap, (event.ts, self._seq, event))
        self._seq += 1

    def pop(self) -> Optional[_Event]:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


def _poisson_times(rng: np.random.Generator, rate: float, horizon: float) -> List[float]:
    """[0, horizon) 안의 포아송 도착 시각 (rate는 초당)"""
    if rate <= 0:
        return []
    times: List[float] = []
    t = float(rng.exponential(1.0 / rate))
    while t < horizon:
        times.append(t)
        t += float(rng.exponential(1.0 / rate))
    return times


# =============================================================================
# 시뮬레이터
# =============================================================================
@dataclass
class _Draft:
    """커밋 전 차익거래 한 건"""

    leg1: SwapRecord
    leg2: SwapRecord
    src_pool: CpmmPool
    dst_pool: CpmmPool
    transfers: List[TransferRecord] = field(default_factory=lambda: list[TransferRecord]())
    link: Optional[NativeBridgeLink] = None
    bridge_txs: Tuple[TxKey, ...] = ()
    bridge_latency: Optional[int] = None
    bridge_gas: Decimal = Decimal(0)


class _World:
    def __init__(self, scenario: Scenario) -> None:
        self.s = scenario
        self.detector = DetectorConfig()
        self.pools = [CpmmPool(p.reserve_a, p.reserve_b) for p in scenario.pools]
        self.paths: Dict[str, GbmPath] = {
            c.name: gbm_sample(
                c.usd0,
                c.mu,
                c.sigma,
                scenario.horizon / DAY,
                PRICE_STEP_SECONDS / DAY,
                int(_digest("price", scenario.seed, c.name)[:15], 16),
            )
            for c in scenario.classes
        }
        self.registry = EquivalenceRegistry()
        for chain in scenario.chains:
            for cls in scenario.classes:
                self.registry.add(chain.id, asset_address(chain.id, cls.name), cls.name, cls.is_stable, cls.is_native)
        self.chains = ChainDirectory(
            ChainInfo(c.id, c.layer, c.block_time, c.native_class) for c in scenario.chains
        )
        self.fee_rng = make_rng(scenario.seed, _STREAM_FEES)
        self.tx_counter = 0
        self.message_number = 0
        self.swaps: List[SwapRecord] = []
        self.transfers: List[TransferRecord] = []
        self.links: List[NativeBridgeLink] = []
        self.truth: List[PlantedArbitrage] = []
        self.report = ScenarioReport()
        self.busy_until: Dict[str, int] = {}
        self.entity_legs: Dict[str, List[SwapRecord]] = {}

    # -- 가격 / 식별자 -------------------------------------------------------
    def usd(self, cls: str, timestamp: int) -> float:
        return self.paths[cls].value_at(max(timestamp - self.s.start_time, 0) / DAY)

    def next_tx(self, chain: str) -> str:
        self.tx_counter += 1
        return "0x" + _digest("tx", self.s.seed, chain, self.tx_counter)

    def gas(self, mean: float) -> Decimal:
        return to_amount(mean * float(self.fee_rng.uniform(0.5, 1.5)))

    def block_time(self, chain: str) -> int:
        return self.s.chain(chain).block_time

    def snap(self, chain: str, timestamp: int) -> int:
        return snap_to_block(timestamp, self.block_time(chain))

    def swap_record(
        self,
        chain: str,
        timestamp: int,
        originator: str,
        first_contact: Optional[str],
        cls_in: str,
        cls_out: str,
        amount_in: Decimal,
        amount_out: Decimal,
        tip: Decimal = Decimal(0),
    ) -> SwapRecord:
        return SwapRecord(
            chain=chain,
            tx_hash=self.next_tx(chain),
            block=timestamp // self.block_time(chain),
            timestamp=timestamp,
            originator=originator,
            first_contact=first_contact,
            asset_in=asset_address(chain, cls_in),
            asset_out=asset_address(chain, cls_out),
            amount_in=amount_in,
            amount_out=amount_out,
            gas_fee_native=self.gas(self.s.chain(chain).gas_fee),
            coinbase_tip_native=tip,
        )

    # -- 노이즈 ---------------------------------------------------------------
    def noise_trade(self, index: int, offset: float, rng: np.random.Generator) -> None:
        spec_i = int(rng.integers(len(self.pools)))
        forward = bool(rng.integers(2))
        usd_size = float(rng.lognormal(self.s.noise.size_log_mean, self.s.noise.size_log_sigma))

        spec = self.s.pools[spec_i]
        pool = self.pools[spec_i]
        ts = self.snap(spec.chain, self.s.start_time + int(math.ceil(offset)))
        cls_in, cls_out = (spec.class_a, spec.class_b) if forward else (spec.class_b, spec.class_a)
        amount_in = to_amount(usd_size / self.usd(cls_in, ts))
        if amount_in <= 0:
            return
        out = pool.swap_a_for_b(float(amount_in)) if forward else pool.swap_b_for_a(float(amount_in))
        amount_out = to_amount(out)
        if amount_out <= 0:
            return
        trader = derive_address("noise", self.s.seed, index)
        self.swaps.append(
            self.swap_record(spec.chain, ts, trader, router_address(spec.chain), cls_in, cls_out, amount_in, amount_out)
        )
        self.report.noise_swaps += 1

    # -- 차익거래 ---------------------------------------------------------------
    @staticmethod
    def _swap(pool: CpmmPool, spec: PoolSpec, cls_in: str, amount: float) -> float:
        return pool.swap_a_for_b(amount) if cls_in == spec.class_a else pool.swap_b_for_a(amount)

    def _reprice(self, spec_i: int, price_b_in_x: float, x_cls: str) -> None:
        """풀을 'pair[1] 한 개의 pair[0] 가격 = price_b_in_x' 상태로 맞춘다."""
        spec = self.s.pools[spec_i]
        pool = self.pools[spec_i]
        # CpmmPool.price = R^A / R^B = B 한 개의 A 가격
        pool.rebalance_to_price(price_b_in_x if spec.class_a == x_cls else 1.0 / price_b_in_x)

    def _reserve_of(self, spec_i: int, cls: str) -> float:
        spec = self.s.pools[spec_i]
        pool = self.pools[spec_i]
        return pool.reserve_a if spec.class_a == cls else pool.reserve_b

    def opportunity(self, agent_i: int, offset: float, rng: np.random.Generator) -> None:
        agent = self.s.arbitrageurs[agent_i]
        self.report.opportunities += 1
        x_cls, y_cls = agent.pair
        lo, hi = agent.gap_range
        p = 1.0 + float(rng.uniform(lo, hi))
        t0 = self.s.start_time + int(math.ceil(offset))

        src_i = self.s.pool_index(agent.source, agent.pair)
        dst_i = self.s.pool_index(agent.destination, agent.pair)
        assert src_i is not None and dst_i is not None
        reference = self.usd(y_cls, t0) / self.usd(x_cls, t0)
        self._reprice(src_i, reference, x_cls)
        self._reprice(dst_i, reference * p, x_cls)

        leg1_ts = self.snap(agent.source, t0)
        if leg1_ts <= self.busy_until.get(agent.address, -1):
            self.report.refused["busy"] += 1
            return

        size = min(agent.capital, 0.5 * (math.sqrt(p) - 1.0) * self._reserve_of(src_i, x_cls))
        draft = self._draft(agent, rng, src_i, dst_i, leg1_ts, to_amount(size))
        if isinstance(draft, str):
            self.report.refused[draft] += 1
            return
        self._commit(agent, draft, src_i, dst_i)

    def _draft(
        self,
        agent: AgentSpec,
        rng: np.random.Generator,
        src_i: int,
        dst_i: int,
        leg1_ts: int,
        amount_in: Decimal,
    ) -> Union[_Draft, str]:
        x_cls, y_cls = agent.pair
        src_spec, dst_spec = self.s.pools[src_i], self.s.pools[dst_i]
        src_pool, dst_pool = copy.copy(self.pools[src_i]), copy.copy(self.pools[dst_i])
        if amount_in <= 0:
            return "dust"
        out1 = to_amount(self._swap(src_pool, src_spec, x_cls, float(amount_in)))
        if out1 <= 0:
            return "dust"

        tip = to_amount(agent.tip)
        if agent.contract is not None:
            origin1 = derive_address("bot", agent.address, agent.source)
            origin2 = derive_address("bot", agent.address, agent.destination)
            contact: Optional[str] = agent.contract
        else:
            origin1 = origin2 = agent.address
            contact = None

        draft_transfers: List[TransferRecord] = []
        link: Optional[NativeBridgeLink] = None
        bridge_txs: Tuple[TxKey, ...] = ()
        bridge_latency: Optional[int] = None
        bridge_gas = Decimal(0)

        if agent.strategy is AgentStrategy.INVENTORY:
            dst_bt = self.block_time(agent.destination)
            gap = float(rng.uniform(0.0, max(agent.latency - dst_bt, 0)))
            leg2_ts = self.snap(agent.destination, leg1_ts + int(math.floor(gap)))
            if leg2_ts - leg1_ts > agent.latency:
                return "latency"
            in2 = out1
        else:
            bridge = self.s.bridge_for(agent)
            assert bridge is not None
            latency = int(math.ceil(float(rng.lognormal(math.log(bridge.latency_median), bridge.log_sigma))))
            fee_amount = (out1 * Decimal(repr(bridge.fee))).quantize(AMOUNT_QUANTUM, rounding=ROUND_DOWN)
            in2 = out1 - fee_amount
            bridge_gas = self.gas(bridge.gas_fee)
            out_ts = leg1_ts
            in_ts = self.snap(agent.destination, out_ts + latency)
            leg2_ts = self.snap(agent.destination, in_ts + int(rng.uniform(0.0, agent.latency)))
            out_hash = self.next_tx(agent.source)
            in_hash = self.next_tx(agent.destination)
            bridge_txs = ((agent.source, out_hash), (agent.destination, in_hash))
            bridge_latency = in_ts - out_ts
            if bridge.kind is BridgeKind.NATIVE:
                link = NativeBridgeLink(
                    l1_tx=out_hash,
                    l2_tx=in_hash,
                    message_number=self.message_number + 1,
                    token=asset_address(agent.source, y_cls),
                    amount=out1,
                    sender=origin1,
                    recipient=origin2,
                    l1_timestamp=out_ts,
                    l2_timestamp=in_ts,
                    l1_chain=agent.source,
                    l2_chain=agent.destination,
                    fee_native=bridge_gas,
                )
            else:
                src_bridge = bridge_contract(bridge.kind, agent.source)
                dst_bridge = bridge_contract(bridge.kind, agent.destination)
                draft_transfers = [
                    TransferRecord(
                        chain=agent.source,
                        tx_hash=out_hash,
                        log_index=0,
                        block=out_ts // self.block_time(agent.source),
                        timestamp=out_ts,
                        token=asset_address(agent.source, y_cls),
                        from_addr=origin1,
                        to_addr=src_bridge,
                        amount=out1,
                        fee_native=bridge_gas,
                    ),
                    TransferRecord(
                        chain=agent.destination,
                        tx_hash=in_hash,
                        log_index=0,
                        block=in_ts // self.block_time(agent.destination),
                        timestamp=in_ts,
                        token=asset_address(agent.destination, y_cls),
                        from_addr=dst_bridge,
                        to_addr=origin2,
                        amount=in2,
                    ),
                ]

        if in2 <= 0:
            return "dust"
        out2 = to_amount(self._swap(dst_pool, dst_spec, y_cls, float(in2)))
        if out2 <= 0:
            return "dust"

        leg1 = self.swap_record(agent.source, leg1_ts, origin1, contact, x_cls, y_cls, amount_in, out1, tip)
        leg2 = self.swap_record(agent.destination, leg2_ts, origin2, contact, y_cls, x_cls, in2, out2, tip)

        window = self.detector.window_for(_pair_class(self.s, x_cls, y_cls))
        if leg2_ts - leg1_ts > window:
            return "h3_window"
        if self._collides(agent, leg1, leg2):
            return "collision"
        return _Draft(leg1, leg2, src_pool, dst_pool, draft_transfers, link, bridge_txs, bridge_latency, bridge_gas)

    def _collides(self, agent: AgentSpec, leg1: SwapRecord, leg2: SwapRecord) -> bool:
        earlier = self.entity_legs.get(agent.address, [])
        for new in (leg1, leg2):
            for old in earlier:
                if self._cross_match(old, new) or self._cross_match(new, old):
                    return True
        return False

    def _cross_match(self, first: SwapRecord, second: SwapRecord) -> bool:
        """H1-H3만 보는 교차 매치 여부"""
        if first.chain == second.chain:
            return False
        reg = self.registry
        in1, out1 = reg.class_of(first.chain, first.asset_in), reg.class_of(first.chain, first.asset_out)
        in2, out2 = reg.class_of(second.chain, second.asset_in), reg.class_of(second.chain, second.asset_out)
        if in1 is None or out1 is None or out1 != in2 or out2 != in1:
            return False
        cfg = self.detector
        window = cfg.window_for(_pair_class(self.s, in1, out1))
        gap = second.timestamp - first.timestamp
        if gap < -cfg.clock_skew_tolerance or gap > window:
            return False
        return marginal_difference(first, second) <= cfg.marginal_threshold

    def _commit(self, agent: AgentSpec, draft: _Draft, src_i: int, dst_i: int) -> None:
        self.pools[src_i] = draft.src_pool
        self.pools[dst_i] = draft.dst_pool
        self.swaps.extend((draft.leg1, draft.leg2))
        self.transfers.extend(draft.transfers)
        if draft.link is not None:
            self.message_number += 1
            self.links.append(draft.link)
        self.busy_until[agent.address] = draft.leg2.timestamp
        self.entity_legs.setdefault(agent.address, []).extend((draft.leg1, draft.leg2))
        self.report.planted[agent.strategy.value] += 1
        self.truth.append(
            PlantedArbitrage(
                leg1=draft.leg1.key,
                leg2=draft.leg2.key,
                strategy=agent.strategy,
                entity=agent.contract or agent.address,
                bridge_txs=draft.bridge_txs,
                true_profit_usd=self._true_profit(draft),
                gap_seconds=draft.leg2.timestamp - draft.leg1.timestamp,
                bridge_latency=draft.bridge_latency,
            )
        )

    def _true_profit(self, d: _Draft) -> float:
        """시간 버킷 가격표 기준 순이익 (accounting과 같은 규칙)"""
        table = self.price_table_lookup
        x_cls = self.registry.class_of(d.leg1.chain, d.leg1.asset_in)
        assert x_cls is not None
        native1 = self.s.chain(d.leg1.chain).native_class
        native2 = self.s.chain(d.leg2.chain).native_class
        t1, t2 = d.leg1.timestamp, d.leg2.timestamp
        revenue = float(d.leg2.amount_out) * table(x_cls, t2) - float(d.leg1.amount_in) * table(x_cls, t1)
        costs = math.fsum(
            [
                float(d.leg1.gas_fee_native) * table(native1, t1),
                float(d.leg2.gas_fee_native) * table(native2, t2),
                float(d.leg1.coinbase_tip_native) * table(native1, t1),
                float(d.leg2.coinbase_tip_native) * table(native2, t2),
                float(d.bridge_gas) * table(native1, t1),
            ]
        )
        return revenue - costs

    def price_table_lookup(self, cls: str, timestamp: int) -> float:
        hour = hour_bucket(timestamp)
        return self.usd(cls, max(hour * 3600, self.s.start_time))

    # -- 출력 ---------------------------------------------------------------
    def labels(self) -> LabelSet:
        labels = LabelSet()
        for chain in self.s.chains:
            labels.add(router_address(chain.id), "non_mev")
        for b in self.s.bridges:
            for chain in (b.source, b.destination):
                addr = bridge_contract(b.kind, chain)
                if addr not in labels.non_mev:
                    labels.add(addr, "non_mev")
        for a in self.s.arbitrageurs:
            if a.contract is not None:
                labels.add(a.contract, "mev")
        return labels

    def price_table(self, last_ts: int) -> PriceTable:
        table = PriceTable()
        for cls in self.s.classes:
            for hour in range(hour_bucket(self.s.start_time), hour_bucket(last_ts) + 1):
                table.add(cls.name, hour, self.price_table_lookup(cls.name, hour * 3600))
        return table


def _pair_class(s: Scenario, a: str, b: str) -> PairClass:
    ca, cb = s.class_spec(a), s.class_spec(b)
    if (ca.is_stable and cb.is_native) or (ca.is_native and cb.is_stable):
        return PairClass.STABLECOIN_NATIVE
    return PairClass.OTHER


def _record_order(rec: SwapRecord) -> Tuple[int, str, str]:
    return (rec.timestamp, rec.chain, rec.tx_hash)


def generate(scenario: Scenario) -> ScenarioOutput:
    """시나리오 하나를 처음부터 끝까지 돌린다. 같은 시나리오(시드 포함)는 항상 같은 결과를 낸다."""
    world = _World(scenario)
    queue = EventQueue()

    noise_rng = make_rng(scenario.seed, _STREAM_NOISE)
    for i, t in enumerate(_poisson_times(noise_rng, scenario.noise.rate, scenario.horizon)):
        queue.push(_Event(t, "noise", i))

    agent_rngs: List[np.random.Generator] = []
    for i, agent in enumerate(scenario.arbitrageurs):
        rng = make_rng(scenario.seed, _STREAM_AGENT_BASE + i)
        agent_rngs.append(rng)
        for t in _poisson_times(rng, agent.opportunity_rate / 3600.0, scenario.horizon):
            queue.push(_Event(t, "opportunity", i))

    while (event := queue.pop()) is not None:
        if event.kind == "noise":
            world.noise_trade(event.index, event.ts, noise_rng)
        else:
            world.opportunity(event.index, event.ts, agent_rngs[event.index])

    swaps = world.swaps
    if scenario.collision_rate > 0:
        before = len(swaps)
        swaps = inject_collisions(
            swaps, scenario.collision_rate, scenario.seed, registry=world.registry, chains=world.chains
        )
        world.report.decoy_swaps = len(swaps) - before

    swaps = sorted(swaps, key=_record_order)
    transfers = sorted(world.transfers, key=lambda r: (r.timestamp, r.chain, r.tx_hash, r.log_index))
    links = sorted(world.links, key=lambda link: link.message_number)
    last_ts = max(
        [scenario.start_time]
        + [r.timestamp for r in swaps]
        + [r.timestamp for r in transfers]
        + [link.l2_timestamp for link in links]
    )
    return ScenarioOutput(
        swaps=swaps,
        transfers=transfers,
        native_links=links,
        prices=world.price_table(last_ts),
        registry=world.registry,
        labels=world.labels(),
        chains=world.chains,
        truth=world.truth,
        report=world.report,
    )


# =============================================================================
# 충돌 주입
# =============================================================================
def inject_collisions(
    swaps: Sequence[SwapRecord],
    rate: float,
    seed: int,
    *,
    registry: EquivalenceRegistry,
    chains: ChainDirectory,
) -> List[SwapRecord]:
    """
    각 스왑마다 확률 rate로 가짜 쌍 하나를 덧붙인다. 가짜 쌍은 원래 스왑을 흉내 낸 다리와
    다른 체인에서 거의 같은 금액으로 되돌아오는 다리로, 서로 다른 새 주소에서 나오고
    first_contact가 없어 H4를 통과하지 못한다. 정답은 바뀌지 않는다.
    """
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"collision rate must be in [0, 1], got {rate}")
    out = list(swaps)
    if rate == 0.0:
        return out
    rng = make_rng(seed, _STREAM_DECOYS)
    chain_ids = [c.chain for c in chains]

    for n, swap in enumerate(sorted(swaps, key=_record_order)):
        if float(rng.random()) >= rate:
            continue
        cls_in = registry.class_of(swap.chain, swap.asset_in)
        cls_out = registry.class_of(swap.chain, swap.asset_out)
        if cls_in is None or cls_out is None:
            continue
        other = next(
            (
                c
                for c in chain_ids
                if c != swap.chain and registry.assets_of(c, cls_in) and registry.assets_of(c, cls_out)
            ),
            None,
        )
        info = chains.get(other) if other is not None else None
        if other is None or info is None:
            continue

        hash_a = "0x" + _digest("decoy", seed, n, "a")
        hash_b = "0x" + _digest("decoy", seed, n, "b")
        ts_a = swap.timestamp
        src = chains.get(swap.chain)
        ts_b = snap_to_block(ts_a + int(rng.integers(0, 10)), info.block_time)
        ratio = Decimal(repr(1.0 - float(rng.uniform(0.0, 0.004))))
        amount_b_in = (swap.amount_out * ratio).quantize(AMOUNT_QUANTUM, rounding=ROUND_DOWN)
        if amount_b_in <= 0:
            continue
        decoy_a = SwapRecord(
            chain=swap.chain,
            tx_hash=hash_a,
            block=ts_a // src.block_time if src is not None else swap.block,
            timestamp=ts_a,
            originator=derive_address("decoy", seed, n, "a"),
            first_contact=None,
            asset_in=swap.asset_in,
            asset_out=swap.asset_out,
            amount_in=swap.amount_in,
            amount_out=swap.amount_out,
            gas_fee_native=swap.gas_fee_native,
            coinbase_tip_native=Decimal(0),
        )
        decoy_b = SwapRecord(
            chain=other,
            tx_hash=hash_b,
            block=ts_b // info.block_time,
            timestamp=ts_b,
            originator=derive_address("decoy", seed, n, "b"),
            first_contact=None,
            asset_in=registry.assets_of(other, cls_out)[0],
            asset_out=registry.assets_of(other, cls_in)[0],
            amount_in=amount_b_in,
            amount_out=(swap.amount_in * Decimal("1.01")).quantize(AMOUNT_QUANTUM, rounding=ROUND_DOWN),
            gas_fee_native=swap.gas_fee_native,
            coinbase_tip_native=Decimal(0),
        )
        out.extend((decoy_a, decoy_b))
    return out


# =============================================================================
# 파일 출력
# =============================================================================
def write_scenario(out_dir: Path, output: ScenarioOutput) -> List[Path]:
    """시나리오 결과 파일을 모두 쓰고 경로 목록을 돌려준다."""
    paths = {
        SWAPS_FILE: out_dir / SWAPS_FILE,
        TRANSFERS_FILE: out_dir / TRANSFERS_FILE,
        NATIVE_LINKS_FILE: out_dir / NATIVE_LINKS_FILE,
        PRICES_FILE: out_dir / PRICES_FILE,
        EQUIVALENCE_FILE: out_dir / EQUIVALENCE_FILE,
        LABELS_FILE: out_dir / LABELS_FILE,
        CHAINS_FILE: out_dir / CHAINS_FILE,
        TRUTH_FILE: out_dir / TRUTH_FILE,
        SCENARIO_REPORT_FILE: out_dir / SCENARIO_REPORT_FILE,
    }
    write_swaps(paths[SWAPS_FILE], output.swaps)
    write_transfers(paths[TRANSFERS_FILE], output.transfers)
    write_native_links(paths[NATIVE_LINKS_FILE], output.native_links)
    write_prices(paths[PRICES_FILE], output.prices)
    write_equivalence(paths[EQUIVALENCE_FILE], output.registry)
    write_labels(paths[LABELS_FILE], output.labels)
    write_chains(paths[CHAINS_FILE], output.chains)
    write_jsonl(paths[TRUTH_FILE], "truth", (truth_to_dict(t) for t in output.truth))
    save_json(paths[SCENARIO_REPORT_FILE], output.report.to_dict())
    return list(paths.values())
