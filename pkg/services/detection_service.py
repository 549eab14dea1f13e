# services/detection_service.py
"""
[탐지 서비스]

입력 파일 → 스왑 집계 → 후보 생성(버킷 병렬) → H4 / 중복 제거 → 실행 방식 분류 → 출력.

출력 파일 (out_dir 아래):
    matches.jsonl        분류된 매치 (t1, 해시 순)
    detect_report.json   입력/후보/매치 카운터와 건너뛴 줄
    bridge_report.json   실행 방식별 통계
    eval.json            정답 파일이 주어진 경우의 정밀도/재현율
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from core.events.interfaces import EventBusLike
from core.exceptions import ConfigError
from domain import chaindata, scenario
from domain.bridgelink import (
    BridgeIndex,
    ClassifiedMatch,
    build_bridge_report,
    classify_all,
    write_matches,
)
from domain.chaindata import (
    AggregationReport,
    ChainDirectory,
    EquivalenceRegistry,
    LabelSet,
    LoadReport,
    NativeBridgeLink,
    SwapRecord,
    TransferRecord,
    TxKey,
)
from domain.detector import CalibrationRow, DetectorConfig, DetectReport, calibrate_marginal_threshold, detect
from domain.scenario import PlantedArbitrage, load_truth
from services.base_service import BaseService
from utilities.file_handler import load_json, save_csv, save_json
from workers.bucket_worker import BucketWorker

MATCHES_FILE = "matches.jsonl"
DETECT_REPORT_FILE = "detect_report.json"
BRIDGE_REPORT_FILE = "bridge_report.json"
EVAL_FILE = "eval.json"
CALIBRATION_FILE = "calibration.csv"

_DECIMAL_KEYS = ("marginal_threshold", "dedup_marginal")
_INT_KEYS = ("dedup_gap_seconds", "window_stable_seconds", "window_other_seconds", "clock_skew_tolerance")


def parse_detector_config(obj: Mapping[str, Any], base: Optional[DetectorConfig] = None) -> DetectorConfig:
    """JSON 객체의 값으로 base 설정을 덮어쓴다. 모르는 키는 오류."""
    unknown = sorted(set(obj) - set(_DECIMAL_KEYS) - set(_INT_KEYS))
    if unknown:
        raise ConfigError(f"unknown detector settings: {', '.join(unknown)}")
    changes: Dict[str, Any] = {}
    try:
        for key in _DECIMAL_KEYS:
            if key in obj:
                changes[key] = Decimal(str(obj[key]))
        for key in _INT_KEYS:
            if key in obj:
                value = obj[key]
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key} must be an integer, got {value!r}")
                changes[key] = value
    except InvalidOperation as e:
        raise ConfigError(f"detector threshold is not a number: {e}") from e
    return replace(base or DetectorConfig(), **changes)


def load_detector_config(path: Path, base: Optional[DetectorConfig] = None) -> DetectorConfig:
    obj = load_json(path)
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: detector config must be a JSON object")
    return parse_detector_config(obj, base)


# =============================================================================
# 입력
# =============================================================================
@dataclass(frozen=True)
class DetectionInputs:
    equivalence: Path
    labels: Path
    swaps: Optional[Path] = None
    raw_swaps: Optional[Path] = None
    transfers: Optional[Path] = None
    native_links: Optional[Path] = None
    chains: Optional[Path] = None
    truth: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.swaps is None and self.raw_swaps is None:
            raise ConfigError("need swaps or raw swaps input")

    def paths(self) -> List[Path]:
        return [
            p
            for p in (
                self.swaps, self.raw_swaps, self.transfers, self.native_links,
                self.equivalence, self.labels, self.chains, self.truth,
            )
            if p is not None
        ]

    @classmethod
    def from_dir(cls, directory: Path, with_truth: bool = True) -> "DetectionInputs":
        """scenario 출력 폴더 규약의 파일 이름을 쓴다. 없는 선택 파일은 건너뛴다."""

        def opt(name: str) -> Optional[Path]:
            path = directory / name
            return path if path.exists() else None

        return cls(
            equivalence=directory / scenario.EQUIVALENCE_FILE,
            labels=directory / scenario.LABELS_FILE,
            swaps=directory / scenario.SWAPS_FILE,
            transfers=opt(scenario.TRANSFERS_FILE),
            native_links=opt(scenario.NATIVE_LINKS_FILE),
            chains=opt(scenario.CHAINS_FILE),
            truth=opt(scenario.TRUTH_FILE) if with_truth else None,
        )


@dataclass
class LoadedInputs:
    swaps: List[SwapRecord]
    transfers: List[TransferRecord]
    native_links: List[NativeBridgeLink]
    registry: EquivalenceRegistry
    labels: LabelSet
    chains: ChainDirectory
    truth: Optional[List[PlantedArbitrage]]
    load_reports: List[LoadReport] = field(default_factory=lambda: list[LoadReport]())
    ambiguous_txs: List[TxKey] = field(default_factory=lambda: list[TxKey]())


# =============================================================================
# 평가
# =============================================================================
@dataclass(frozen=True)
class EvaluationResult:
    precision: float
    recall: float
    classification_accuracy: float
    matches: int
    planted: int
    true_positives: int
    correctly_classified: int
    zero_matches: bool
    misclassified: Tuple[Tuple[TxKey, TxKey, str, str], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "classification_accuracy": self.classification_accuracy,
            "matches": self.matches,
            "planted": self.planted,
            "true_positives": self.true_positives,
            "correctly_classified": self.correctly_classified,
            "zero_matches": self.zero_matches,
            "misclassified": [
                {"leg1": list(a), "leg2": list(b), "expected": exp, "got": got}
                for a, b, exp, got in self.misclassified
            ],
        }


def evaluate(classified: Sequence[ClassifiedMatch], truth: Sequence[PlantedArbitrage]) -> EvaluationResult:
    """
    매치 (leg1, leg2) 키와 정답 키의 일치로 정밀도/재현율을 구하고,
    맞힌 매치 중 실행 방식까지 맞은 비율을 classification_accuracy로 낸다.
    매치가 없으면 정밀도는 1.0으로 두고 zero_matches=True. 분모가 0인 다른 비율도 1.0.
    """
    expected = {(t.leg1, t.leg2): t.expected_method for t in truth}
    found: Set[Tuple[TxKey, TxKey]] = set()
    hits = correct = 0
    wrong: List[Tuple[TxKey, TxKey, str, str]] = []
    for cm in classified:
        key = cm.match.key
        found.add(key)
        method = expected.get(key)
        if method is None:
            continue
        hits += 1
        got = cm.execution.method.value
        if got == method:
            correct += 1
        else:
            wrong.append((key[0], key[1], method, got))

    return EvaluationResult(
        precision=hits / len(found) if found else 1.0,
        recall=hits / len(expected) if expected else 1.0,
        classification_accuracy=correct / hits if hits else 1.0,
        matches=len(found),
        planted=len(expected),
        true_positives=hits,
        correctly_classified=correct,
        zero_matches=not found,
        misclassified=tuple(sorted(wrong)),
    )


@dataclass
class DetectionResult:
    classified: List[ClassifiedMatch]
    report: DetectReport
    inputs: LoadedInputs
    evaluation: Optional[EvaluationResult] = None


# =============================================================================
# 서비스
# =============================================================================
class DetectionService(BaseService):
    def __init__(
        self,
        bus: Optional[EventBusLike] = None,
        threads: int = 1,
        config: Optional[DetectorConfig] = None,
        strict: bool = False,
    ):
        super().__init__(bus, threads)
        self.config = config or DetectorConfig()
        self.strict = strict

    # ==========================================================
    # 읽기
    # ==========================================================
    def _records(self, stage: str, path: Path, loader: Any, kind: str, reports: List[LoadReport]) -> List[Any]:
        self.stage_started(stage)
        rep = LoadReport(kind)
        rows = list(loader(path, self.strict, rep))
        reports.append(rep)
        self.records_skipped(stage, "schema", rep.skipped)
        self.stage_finished(stage, rep.records)
        return rows

    def load(self, inputs: DetectionInputs) -> LoadedInputs:
        reports: List[LoadReport] = []
        registry = chaindata.load_equivalence(inputs.equivalence, self.strict, _tracked(reports, "equivalence"))
        labels = chaindata.load_labels(inputs.labels, self.strict, _tracked(reports, "labels"))
        chains = (
            chaindata.load_chains(inputs.chains, self.strict, _tracked(reports, "chains"))
            if inputs.chains is not None
            else ChainDirectory()
        )

        swaps: List[SwapRecord] = []
        if inputs.swaps is not None:
            swaps.extend(self._records("load_swaps", inputs.swaps, chaindata.load_swaps, "swaps", reports))
        ambiguous: List[TxKey] = []
        if inputs.raw_swaps is not None:
            events = self._records("load_raw_swaps", inputs.raw_swaps, chaindata.load_raw_swaps, "raw_swaps", reports)
            agg = AggregationReport()
            swaps.extend(chaindata.aggregate_swaps(events, agg))
            ambiguous = sorted(agg.ambiguous)
            self.records_skipped("aggregate_swaps", "ambiguous_endpoints", len(ambiguous))

        transfers: List[TransferRecord] = []
        if inputs.transfers is not None:
            transfers = self._records("load_transfers", inputs.transfers, chaindata.load_transfers, "transfers", reports)
        links: List[NativeBridgeLink] = []
        if inputs.native_links is not None:
            links = self._records(
                "load_native_links", inputs.native_links, chaindata.load_native_links, "native_links", reports
            )

        truth: Optional[List[PlantedArbitrage]] = None
        if inputs.truth is not None:
            truth = load_truth(inputs.truth, self.strict)

        self.log_info(
            f"입력: 스왑 {len(swaps)}, 전송 {len(transfers)}, 네이티브 브릿지 {len(links)}, "
            f"자산 매핑 {len(registry)}"
        )
        return LoadedInputs(swaps, transfers, links, registry, labels, chains, truth, reports, ambiguous)

    # ==========================================================
    # 탐지
    # ==========================================================
    def run(self, loaded: LoadedInputs) -> DetectionResult:
        report = DetectReport()

        self.stage_started("detect")
        matches = detect(
            loaded.swaps, loaded.registry, loaded.labels, self.config, report, self.mapper(BucketWorker)
        )
        self.records_skipped("detect", "unmapped_asset", report.unmapped)
        self.records_skipped("detect", "zero_output", report.zero_output)
        self.stage_finished("detect", len(matches))
        self.log_info(
            f"버킷 {report.buckets}, 후보 {report.candidates}, H4 탈락 {report.rejected_h4}, 매치 {report.matches}"
        )

        self.stage_started("classify")
        index = BridgeIndex.build(loaded.native_links, loaded.transfers, loaded.registry)
        classified = classify_all(matches, index)
        self.stage_finished("classify", len(classified))

        evaluation = None
        if loaded.truth is not None:
            evaluation = evaluate(classified, loaded.truth)
            self.log_info(
                f"정밀도 {evaluation.precision:.4f}, 재현율 {evaluation.recall:.4f}, "
                f"분류 정확도 {evaluation.classification_accuracy:.4f}"
            )
        return DetectionResult(classified, report, loaded, evaluation)

    def calibrate(self, loaded: LoadedInputs, thresholds: Sequence[Decimal]) -> List[CalibrationRow]:
        """H2 상한 후보별 후보/매치 수. 정답이 있으면 정밀도/재현율도 함께."""
        self.stage_started("calibrate")
        truth = truth_keys(loaded.truth) if loaded.truth is not None else None
        rows = calibrate_marginal_threshold(
            loaded.swaps, loaded.registry, loaded.labels, thresholds, truth, self.config
        )
        self.stage_finished("calibrate", len(rows))
        return rows

    # ==========================================================
    # 쓰기
    # ==========================================================
    def write_calibration(self, out_dir: Path, rows: Sequence[CalibrationRow]) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / CALIBRATION_FILE
        table = [["marginal_threshold", "candidates", "matches", "precision", "recall"]]
        for r in rows:
            table.append(
                [
                    str(r.threshold), str(r.candidates), str(r.matches),
                    "" if r.precision is None else repr(r.precision),
                    "" if r.recall is None else repr(r.recall),
                ]
            )
        save_csv(path, table)
        return path

    def write(self, out_dir: Path, result: DetectionResult) -> List[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / MATCHES_FILE, out_dir / DETECT_REPORT_FILE, out_dir / BRIDGE_REPORT_FILE]
        write_matches(paths[0], result.classified)

        detect_report = result.report.to_dict()
        detect_report["config"] = self.config.to_dict()
        detect_report["inputs"] = [r.to_dict() for r in result.inputs.load_reports]
        detect_report["ambiguous_endpoints"] = [f"{c}:{h}" for c, h in result.inputs.ambiguous_txs]
        save_json(paths[1], detect_report)

        bridge = build_bridge_report(result.classified, result.inputs.chains)
        save_json(paths[2], bridge.to_dict())

        if result.evaluation is not None:
            paths.append(out_dir / EVAL_FILE)
            save_json(paths[-1], result.evaluation.to_dict())
        self.log_info(f"{len(result.classified)}건 매치 저장: {paths[0]}")
        return paths


def _tracked(reports: List[LoadReport], kind: str) -> LoadReport:
    rep = LoadReport(kind)
    reports.append(rep)
    return rep


def truth_keys(truth: Iterable[PlantedArbitrage]) -> Set[Tuple[TxKey, TxKey]]:
    return {(t.leg1, t.leg2) for t in truth}
