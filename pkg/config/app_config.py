# config/app_config.py
"""
애플리케이션 설정 및 경로

settings.ini가 없거나 항목이 빠져 있어도 코드의 fallback 값으로 동작한다.
환경 변수:
    DEV_MODE=1       패키징된 실행 파일이어도 소스 트리 기준으로 경로를 잡는다
    XARB_SETTINGS    다른 settings.ini 경로
    XARB_THREADS     병렬 스레드 상한 (CLI --threads가 우선)
"""
import configparser
import os
import sys
from decimal import Decimal
from pathlib import Path
from typing import Optional

from core.exceptions import ConfigError


class AppPaths:
    """애플리케이션 경로 정보 관리"""

    def __init__(self):
        # 앱의 루트 디렉토리 (개발/배포 환경에 따라 다르게 결정)
        self.is_packaged = self._check_is_packaged()
        self.ROOT_DIR = self._get_root_dir()

        self.CONFIG_INI_PATH = self._get_config_path()
        self.LOG_DIR = self.ROOT_DIR / "logs"

    def _check_is_packaged(self) -> bool:
        """
        앱이 패키징된 실행 파일인지 판단
        1. DEV_MODE 환경변수가 1이면 강제 개발 모드 (False)
        2. sys.frozen 속성이 있으면 패키징 모드 (True)
        """
        dev_mode = os.getenv("DEV_MODE", "0").strip().lower()
        if dev_mode in ("1", "true", "yes"):
            return False

        return getattr(sys, "frozen", False)

    def _get_root_dir(self) -> Path:
        """실행 환경에 따른 루트 디렉토리 반환"""
        if self.is_packaged:
            # 배포 환경: 실행 파일이 있는 폴더
            return Path(sys.executable).resolve().parent
        else:
            # 개발 환경: 프로젝트 루트 (현재 파일의 부모의 부모)
            return Path(__file__).resolve().parent.parent

    def _get_config_path(self) -> Path:
        override = os.getenv("XARB_SETTINGS", "").strip()
        if override:
            return Path(override).expanduser()
        return self.ROOT_DIR / "config" / "settings.ini"


class AppConfig:
    """애플리케이션 전체 설정 및 경로 관리"""

    def __init__(self, ini_path: Optional[Path] = None):
        self.paths = AppPaths()
        if ini_path is not None:
            self.paths.CONFIG_INI_PATH = ini_path
        self._config = self._load_settings()

    def _load_settings(self) -> configparser.ConfigParser:
        """settings.ini 파일을 로드한다."""
        config = configparser.ConfigParser()
        if self.paths.CONFIG_INI_PATH.exists():
            try:
                config.read(str(self.paths.CONFIG_INI_PATH), encoding="utf-8")
            except configparser.Error as e:
                raise ConfigError(f"settings.ini 파싱 실패: {self.paths.CONFIG_INI_PATH} ({e})") from e
        return config

    def _get(self, section: str, key: str, fallback: str) -> str:
        return self._config.get(section, key, fallback=fallback)

    def _get_int(self, section: str, key: str, fallback: int) -> int:
        try:
            return self._config.getint(section, key, fallback=fallback)
        except ValueError as e:
            raise ConfigError(f"[{section}] {key}: 정수가 아니다 ({e})") from e

    def _get_float(self, section: str, key: str, fallback: float) -> float:
        try:
            return self._config.getfloat(section, key, fallback=fallback)
        except ValueError as e:
            raise ConfigError(f"[{section}] {key}: 실수가 아니다 ({e})") from e

    # --- [App] --- #
    @property
    def app_name(self) -> str:
        return self._get("App", "APP_NAME", "xarb")

    @property
    def version(self) -> str:
        return self._get("App", "VERSION", "1.0.0")

    @property
    def debug(self) -> bool:
        return self._config.getboolean("App", "DEBUG", fallback=False)

    @property
    def log_to_file(self) -> bool:
        return self._config.getboolean("App", "LOG_TO_FILE", fallback=True)

    # --- [Detector] --- #
    @property
    def marginal_threshold(self) -> Decimal:
        return Decimal(self._get("Detector", "MARGINAL_THRESHOLD", "0.005"))

    @property
    def dedup_marginal(self) -> Decimal:
        return Decimal(self._get("Detector", "DEDUP_MARGINAL", "0.001"))

    @property
    def dedup_gap_seconds(self) -> int:
        return self._get_int("Detector", "DEDUP_GAP_SECONDS", 240)

    @property
    def window_stable_seconds(self) -> int:
        return self._get_int("Detector", "WINDOW_STABLE_SECONDS", 12)

    @property
    def window_other_seconds(self) -> int:
        return self._get_int("Detector", "WINDOW_OTHER_SECONDS", 3600)

    @property
    def clock_skew_tolerance(self) -> int:
        return self._get_int("Detector", "CLOCK_SKEW_TOLERANCE", 0)

    # --- [Model] --- #
    @property
    def bisection_tol(self) -> float:
        return self._get_float("Model", "BISECTION_TOL", 1e-10)

    @property
    def bisection_max_iter(self) -> int:
        return self._get_int("Model", "BISECTION_MAX_ITER", 200)

    # --- [MonteCarlo] --- #
    @property
    def chunk_paths(self) -> int:
        return self._get_int("MonteCarlo", "CHUNK_PATHS", 50_000)

    @property
    def default_steps_per_unit(self) -> int:
        """기본 이산화 간격 = min(1/λ, Δ, 1) / 이 값"""
        return self._get_int("MonteCarlo", "DEFAULT_STEPS_PER_UNIT", 1000)

    # --- 환경 --- #
    @staticmethod
    def env_threads() -> Optional[int]:
        raw = os.getenv("XARB_THREADS", "").strip()
        if not raw:
            return None
        try:
            value = int(raw)
        except ValueError as e:
            raise ConfigError(f"XARB_THREADS must be a positive integer, got {raw!r}") from e
        if value < 1:
            raise ConfigError(f"XARB_THREADS must be a positive integer, got {raw!r}")
        return value


# 전역 설정 인스턴스
APP_CONFIG = AppConfig()
