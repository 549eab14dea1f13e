# services/simulation_service.py
from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from core.events.interfaces import EventBusLike
from domain.scenario import Scenario, ScenarioOutput, generate, load_scenario, write_scenario
from services.base_service import BaseService


class SimulationService(BaseService):
    """시나리오 설정 → 합성 체인 이벤트 + 정답 파일"""

    def __init__(self, bus: Optional[EventBusLike] = None, threads: int = 1):
        super().__init__(bus, threads)

    def load(self, path: Path, seed: Optional[int] = None, collision_rate: Optional[float] = None) -> Scenario:
        """설정 파일을 읽고, 명령행에서 준 seed / 충돌 비율로 덮어쓴다."""
        scenario = load_scenario(path)
        if seed is not None:
            scenario = replace(scenario, seed=seed)
        if collision_rate is not None:
            scenario = replace(scenario, collision_rate=collision_rate)
        self.log_info(
            f"시나리오: 체인 {len(scenario.chains)}, 차익거래자 {len(scenario.arbitrageurs)}, "
            f"기간 {scenario.horizon}s, seed {scenario.seed}"
        )
        return scenario

    def run(self, scenario: Scenario) -> ScenarioOutput:
        self.stage_started("simulate")
        output = generate(scenario)
        report = output.report
        self.stage_finished("simulate", len(output.swaps))
        for reason, count in sorted(report.refused.items()):
            self.records_skipped("simulate", f"refused:{reason}", count)
        self.log_info(
            f"스왑 {len(output.swaps)} (잡음 {report.noise_swaps}, 교란 {report.decoy_swaps}), "
            f"심어진 차익거래 {sum(report.planted.values())}건"
        )
        return output

    def write(self, out_dir: Path, output: ScenarioOutput) -> List[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = write_scenario(out_dir, output)
        self.log_debug(f"{len(paths)}개 파일 저장: {out_dir}")
        return paths
