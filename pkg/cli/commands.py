# cli/commands.py
"""
[하위 명령 처리기]

각 처리기는 파싱된 인자를 받아 Service를 부르고, 결과 파일과 manifest.json을 쓴 뒤
종료 코드를 돌려준다. 표/요약은 stdout, 로그는 stderr로 나간다.
Service와 Manager는 컨테이너에서 주입받는다 (main.py가 이 모듈을 wire 한다).
"""
from __future__ import annotations

import argparse
import json
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from dependency_injector.wiring import Provide, inject

from core.di_container import AppContainer
from core.exceptions import EXIT_OK, ConfigError
from domain import scenario
from domain.bridgelink import ClassifiedMatch
from domain.detector import DetectorConfig
from managers.run_manifest_manager import RunManifestManager
from services.accounting_service import AccountingInputs, AccountingService
from services.detection_service import (
    EVAL_FILE,
    DetectionInputs,
    DetectionService,
    evaluate,
    load_detector_config,
)
from services.model_service import (
    BRIDGE_COST_FILE,
    COST_DIFF_FILE,
    DELTA_THRESHOLD_FILE,
    LAMBDA_THRESHOLD_FILE,
    PROFIT_CURVE_FILE,
    Grid,
    ModelService,
    ValidationPlan,
    drift_to_dict,
)
from services.simulation_service import SimulationService
from services.statistics_service import StatisticsService, pearson_to_dict, welch_to_dict
from utilities.file_handler import save_json, staged_output_dir

Handler = Callable[[argparse.Namespace], int]


def emit(data: Any) -> None:
    """결과 요약을 stdout에 JSON으로 쓴다."""
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    sys.stdout.flush()


# =============================================================================
# model
# =============================================================================
@inject
def cmd_model(
    args: argparse.Namespace,
    service: ModelService = Provide[AppContainer.model_service],
    manifest: RunManifestManager = Provide[AppContainer.run_manifest_manager],
) -> int:
    sub = args.model_command
    out: Path = args.out
    # validate는 seed가 없으면 0으로 고정해 재현되게 한다
    seed = 0 if sub == "validate" and args.seed is None else args.seed
    manifest.begin(f"model {sub}", seed=seed, threads=service.threads)
    # 계산을 모두 끝낸 뒤에만 쓴다 (도중 실패 시 --out을 건드리지 않음)
    writers: List[Callable[[Path], Path]] = []

    if sub == "profit-curve":
        manifest.set_parameters(p_grid=args.p_grid, reserve=args.reserve, mu=args.mu, delta=args.delta)
        rows = service.profit_curve(Grid.parse(args.p_grid), args.reserve, args.mu, args.delta)
        writers.append(lambda d, n=PROFIT_CURVE_FILE, r=rows: service.write_table(d, n, r))

    elif sub == "bridge-cost":
        manifest.set_parameters(p=args.p, mu=args.mu, delta_grid=args.delta_grid)
        rows = service.bridge_cost_curve(args.p, args.mu, Grid.parse(args.delta_grid))
        writers.append(lambda d, n=BRIDGE_COST_FILE, r=rows: service.write_table(d, n, r))

    elif sub == "thresholds":
        manifest.set_parameters(p=args.p, mu=args.mu, delta_grid=args.delta_grid, lambda_grid=args.lambda_grid)
        lam_rows, delta_rows = service.threshold_curves(
            args.p, args.mu, Grid.parse(args.delta_grid), Grid.parse(args.lambda_grid)
        )
        writers.append(lambda d, n=LAMBDA_THRESHOLD_FILE, r=lam_rows: service.write_table(d, n, r))
        writers.append(lambda d, n=DELTA_THRESHOLD_FILE, r=delta_rows: service.write_table(d, n, r))

    elif sub == "cost-diff":
        manifest.set_parameters(p=args.p, lam=args.lam, delta=args.delta, mu_grid=args.mu_grid, mu_lo=args.mu_lo)
        rows = service.cost_diff_curve(args.p, args.lam, args.delta, Grid.parse(args.mu_grid))
        writers.append(lambda d, n=COST_DIFF_FILE, r=rows: service.write_table(d, n, r))
        crossing = service.crossover(args.p, args.lam, args.delta, args.mu_lo)
        emit({"crossover": None if crossing is None else drift_to_dict(crossing)})

    elif sub == "validate":
        plan = ValidationPlan(
            bridge_sigma=args.sigma,
            phi=args.phi,
            bridge_paths=args.bridge_paths,
            inventory_paths=args.inventory_paths,
        )
        manifest.set_parameters(
            bridge_paths=plan.bridge_paths, inventory_paths=plan.inventory_paths, sigma=plan.bridge_sigma, phi=plan.phi
        )
        rows = service.validate(plan, seed or 0)
        writers.append(lambda d, r=rows: service.write_validation(d, r))
        emit(
            {
                "cases": len(rows),
                "passed": sum(1 for r in rows if r.passed),
                "failed": [
                    {"case": r.case, "p": r.params.p, "mu": r.params.mu, "sigma": r.params.sigma,
                     "lam": r.params.lam, "delta": r.params.delta, "k": r.params.k,
                     "closed_form": r.closed_form, "estimate": r.estimate, "std_err": r.std_err}
                    for r in rows
                    if not r.passed
                ],
            }
        )
    else:  # pragma: no cover - argparse choices
        raise ConfigError(f"unknown model curve {sub!r}")

    with staged_output_dir(out) as stage:
        manifest.finish(stage, [write(stage) for write in writers])
    return EXIT_OK


# =============================================================================
# simulate
# =============================================================================
@inject
def cmd_simulate(
    args: argparse.Namespace,
    service: SimulationService = Provide[AppContainer.simulation_service],
    manifest: RunManifestManager = Provide[AppContainer.run_manifest_manager],
) -> int:
    scen = service.load(args.config, args.seed, args.collision_rate)
    manifest.begin("simulate", seed=scen.seed, threads=service.threads)
    manifest.add_config(args.config)
    manifest.set_parameters(collision_rate=scen.collision_rate, horizon=scen.horizon)

    output = service.run(scen)
    # 모든 파일(manifest 포함)을 임시 폴더에 쓰고, 성공했을 때만 out으로 옮긴다.
    out: Path = args.out
    with staged_output_dir(out) as stage:
        paths = service.write(stage, output)
        manifest.finish(stage, paths)
    emit(output.report.to_dict())
    return EXIT_OK


# =============================================================================
# detect
# =============================================================================
def _detection_inputs(args: argparse.Namespace) -> DetectionInputs:
    base = DetectionInputs.from_dir(args.input_dir, with_truth=not args.no_truth) if args.input_dir else None
    explicit: Dict[str, Optional[Path]] = {
        name: getattr(args, name)
        for name in ("swaps", "raw_swaps", "transfers", "native_links", "equivalence", "labels", "chains", "truth")
    }
    if base is None:
        if explicit["equivalence"] is None or explicit["labels"] is None:
            raise ConfigError("detect needs --equivalence and --labels (or --input-dir)")
        return DetectionInputs(
            equivalence=explicit["equivalence"],
            labels=explicit["labels"],
            swaps=explicit["swaps"],
            raw_swaps=explicit["raw_swaps"],
            transfers=explicit["transfers"],
            native_links=explicit["native_links"],
            chains=explicit["chains"],
            truth=None if args.no_truth else explicit["truth"],
        )
    # 명시한 파일이 폴더 규약보다 우선
    return DetectionInputs(
        equivalence=explicit["equivalence"] or base.equivalence,
        labels=explicit["labels"] or base.labels,
        swaps=explicit["swaps"] or (None if explicit["raw_swaps"] else base.swaps),
        raw_swaps=explicit["raw_swaps"],
        transfers=explicit["transfers"] or base.transfers,
        native_links=explicit["native_links"] or base.native_links,
        chains=explicit["chains"] or base.chains,
        truth=None if args.no_truth else (explicit["truth"] or base.truth),
    )


def _thresholds(text: str) -> List[Decimal]:
    try:
        return [Decimal(t.strip()) for t in text.split(",") if t.strip()]
    except InvalidOperation as e:
        raise ConfigError(f"--calibrate expects comma-separated numbers, got {text!r}") from e


@inject
def cmd_detect(
    args: argparse.Namespace,
    service: DetectionService = Provide[AppContainer.detection_service],
    defaults: DetectorConfig = Provide[AppContainer.detector_config],
    manifest: RunManifestManager = Provide[AppContainer.run_manifest_manager],
) -> int:
    if args.config is not None:
        service.config = load_detector_config(args.config, defaults)
    inputs = _detection_inputs(args)
    thresholds = _thresholds(args.calibrate) if args.calibrate else None
    manifest.begin("detect", seed=args.seed, threads=service.threads)
    manifest.add_config(args.config)
    manifest.add_inputs(*inputs.paths())
    manifest.set_parameters(detector=service.config.to_dict(), strict=service.strict)

    loaded = service.load(inputs)
    result = service.run(loaded)
    calibration = service.calibrate(loaded, thresholds) if thresholds is not None else None
    with staged_output_dir(args.out) as stage:
        outputs = service.write(stage, result)
        if calibration is not None:
            outputs.append(service.write_calibration(stage, calibration))
        manifest.finish(stage, outputs)

    summary: Dict[str, Any] = {"matches": len(result.classified), "report": result.report.to_dict()}
    if result.evaluation is not None:
        summary["evaluation"] = {
            "precision": result.evaluation.precision,
            "recall": result.evaluation.recall,
            "classification_accuracy": result.evaluation.classification_accuracy,
        }
    emit(summary)
    return EXIT_OK


# =============================================================================
# account
# =============================================================================
def _accounting_inputs(args: argparse.Namespace) -> AccountingInputs:
    folder: Optional[Path] = args.input_dir

    def pick(explicit: Optional[Path], name: str, required: bool) -> Optional[Path]:
        if explicit is not None:
            return explicit
        if folder is not None and (folder / name).exists():
            return folder / name
        if required:
            raise ConfigError(f"account needs --{name.split('.')[0]} (or --input-dir containing {name})")
        return None

    prices = pick(args.prices, scenario.PRICES_FILE, True)
    equivalence = pick(args.equivalence, scenario.EQUIVALENCE_FILE, True)
    assert prices is not None and equivalence is not None
    return AccountingInputs(
        matches=args.matches,
        prices=prices,
        equivalence=equivalence,
        chains=pick(args.chains, scenario.CHAINS_FILE, False),
    )


@inject
def cmd_account(
    args: argparse.Namespace,
    service: AccountingService = Provide[AppContainer.accounting_service],
    manifest: RunManifestManager = Provide[AppContainer.run_manifest_manager],
) -> int:
    inputs = _accounting_inputs(args)
    manifest.begin("account", seed=args.seed, threads=service.threads)
    manifest.add_inputs(*inputs.paths())
    manifest.set_parameters(volume=service.convention.value, split_date=args.split_date)

    result = service.run(inputs, args.split_date)
    with staged_output_dir(args.out) as stage:
        manifest.finish(stage, service.write(stage, result))
    s = result.summary
    emit(
        {
            "matches": s.matches,
            "priced": s.priced,
            "unpriced": s.unpriced,
            "revenue_usd": s.revenue_usd,
            "costs_usd": s.costs_usd,
            "net_profit_usd": s.net_profit_usd,
        }
    )
    return EXIT_OK


# =============================================================================
# eval
# =============================================================================
@inject
def cmd_eval(
    args: argparse.Namespace,
    service: AccountingService = Provide[AppContainer.accounting_service],
    detection: DetectionService = Provide[AppContainer.detection_service],
    manifest: RunManifestManager = Provide[AppContainer.run_manifest_manager],
) -> int:
    classified: List[ClassifiedMatch] = service.load_classified(args.matches)
    truth = scenario.load_truth(args.truth, detection.strict)
    result = evaluate(classified, truth)
    service.log_info(
        f"정밀도 {result.precision:.4f}, 재현율 {result.recall:.4f}, 분류 정확도 {result.classification_accuracy:.4f}"
    )
    if args.out is not None:
        manifest.begin("eval", seed=args.seed, threads=service.threads)
        manifest.add_inputs(args.matches, args.truth)
        with staged_output_dir(args.out) as stage:
            path = stage / EVAL_FILE
            save_json(path, result.to_dict())
            manifest.finish(stage, [path])
    emit(
        {
            "precision": result.precision,
            "recall": result.recall,
            "classification_accuracy": result.classification_accuracy,
            "zero_matches": result.zero_matches,
        }
    )
    return EXIT_OK


# =============================================================================
# stats
# =============================================================================
@inject
def cmd_stats(
    args: argparse.Namespace,
    service: StatisticsService = Provide[AppContainer.statistics_service],
) -> int:
    sub = args.stats_command
    if sub == "welch":
        emit(welch_to_dict(service.welch(args.csv, args.a, args.csv_b or args.csv, args.b)))
    elif sub == "pearson":
        emit(pearson_to_dict(service.pearson(args.csv, args.x, args.y)))
    elif sub == "volatility":
        vol = service.volatility(args.prices, args.cls)
        result: Dict[str, Any] = {"class": args.cls, "days": len(vol), "volatility": vol}
        if args.daily is not None:
            result["pearson_vs_" + args.column] = pearson_to_dict(
                service.volatility_vs_daily(vol, args.daily, args.column)
            )
        if args.out is not None:
            service.write_volatility(args.out, vol)
        emit(result)
    elif sub == "split":
        emit({"split_date": args.date, **{k: welch_to_dict(v) for k, v in service.split(args.daily, args.date).items()}})
    else:  # pragma: no cover - argparse choices
        raise ConfigError(f"unknown stats test {sub!r}")
    return EXIT_OK


HANDLERS: Dict[str, Handler] = {
    "model": cmd_model,
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "account": cmd_account,
    "eval": cmd_eval,
    "stats": cmd_stats,
}
