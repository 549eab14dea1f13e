# managers/run_manifest_manager.py
"""
[실행 기록 (manifest.json)]

한 번의 명령 실행에 대한 재현 정보: 하위 명령, 설정/입력 파일, seed, 도구 버전,
시작/종료 시각, 출력 파일의 sha256. 출력 폴더에 가장 마지막으로 (원자적으로) 쓴다.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.events.interfaces import EventBusLike
from managers.base_manager import BaseManager
from utilities.file_handler import load_json, save_json, sha256_file

MANIFEST_FILE = "manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    subcommand: str
    tool_version: str
    seed: Optional[int] = None
    threads: int = 1
    config_paths: List[str] = field(default_factory=lambda: list[str]())
    input_paths: List[str] = field(default_factory=lambda: list[str]())
    parameters: Dict[str, Any] = field(default_factory=lambda: dict[str, Any]())
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=lambda: dict[str, str]())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "threads": self.threads,
            "config_paths": self.config_paths,
            "input_paths": self.input_paths,
            "parameters": self.parameters,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": dict(sorted(self.outputs.items())),
        }


class RunManifestManager(BaseManager):
    """실행 하나 동안 manifest를 모으고, 끝에 out_dir/manifest.json으로 쓴다."""

    def __init__(self, version: str, bus: Optional[EventBusLike] = None):
        super().__init__(bus)
        self.version = version
        self._current: Optional[RunManifest] = None

    @property
    def current(self) -> Optional[RunManifest]:
        return self._current

    def begin(self, subcommand: str, seed: Optional[int] = None, threads: int = 1) -> RunManifest:
        self._current = RunManifest(subcommand=subcommand, tool_version=self.version, seed=seed, threads=threads)
        self.log_debug(f"실행 기록 시작: {subcommand}")
        return self._current

    def _require(self) -> RunManifest:
        if self._current is None:
            raise RuntimeError("begin() must be called before recording a run")
        return self._current

    def add_config(self, *paths: Optional[Path]) -> None:
        self._require().config_paths.extend(str(p) for p in paths if p is not None)

    def add_inputs(self, *paths: Optional[Path]) -> None:
        self._require().input_paths.extend(str(p) for p in paths if p is not None)

    def set_parameters(self, **params: Any) -> None:
        self._require().parameters.update(params)

    def finish(self, out_dir: Path, outputs: List[Path]) -> Path:
        """
        출력 파일들의 체크섬을 계산해 manifest.json을 쓴다.
        키는 out_dir 기준 상대 경로 (폴더가 옮겨져도 검증할 수 있도록).
        """
        manifest = self._require()
        for path in outputs:
            manifest.outputs[os.path.relpath(path, out_dir)] = sha256_file(path)
        manifest.finished_at = _now()
        target = out_dir / MANIFEST_FILE
        save_json(target, manifest.to_dict())
        self.log_info(f"manifest 저장: {target} (출력 {len(manifest.outputs)}개)")
        self._current = None
        return target


def verify_manifest(out_dir: Path) -> List[str]:
    """manifest의 체크섬과 실제 파일을 비교해 맞지 않는 파일 이름을 돌려준다."""
    manifest = load_json(out_dir / MANIFEST_FILE)
    outputs: Dict[str, str] = manifest.get("outputs", {})
    bad: List[str] = []
    for name, digest in sorted(outputs.items()):
        path = out_dir / name
        if not path.exists() or sha256_file(path) != digest:
            bad.append(name)
    return bad
