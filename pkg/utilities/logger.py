# utilities/logger.py
"""
중앙 로깅 유틸리티
------------------

특징:
1. 독립성: AppConfig 등에 의존하지 않고 initialize() 시점에 설정을 주입받는다
2. 콘솔 출력은 stderr로 보낸다 (stdout은 CLI 결과 표 전용)
3. 날짜별 파일 로테이션, 에러 로그 별도 저장
4. 테스트를 위해 reset()으로 초기화 상태를 되돌릴 수 있다
"""

import logging
import sys
from datetime import date, datetime
from pathlib import Path
from typing import Optional


# =============================================================================
# 콘솔에서 컬러 출력을 위한 포매터
# =============================================================================
class ColorFormatter(logging.Formatter):
    """콘솔 출력용 ANSI 색상 포매터"""

    COLORS = {
        "DEBUG": "\x1b[36m",  # Cyan
        "INFO": "\x1b[32m",  # Green
        "WARNING": "\x1b[33m",  # Yellow
        "ERROR": "\x1b[31m",  # Red
        "CRITICAL": "\x1b[35m",  # Magenta
        "RESET": "\x1b[0m",
    }

    def format(self, record: logging.LogRecord) -> str:
        log_message = super().format(record)
        if hasattr(sys.stderr, "isatty") and sys.stderr.isatty():
            color = self.COLORS.get(record.levelname, self.COLORS["RESET"])
            return f"{color}{log_message}{self.COLORS['RESET']}"
        return log_message


# =============================================================================
# 커스텀 핸들러: 날짜별 파일 직접 생성 + 자동 로테이션
# =============================================================================
class DailyRotatingFileHandler(logging.FileHandler):
    """
    prefix_YYYYMMDD.log 형식으로 날짜가 바뀔 때마다 새 파일에 기록한다.
    보관 기간(backup_count 일)이 지난 파일은 로테이션 시 지운다.
    """

    def __init__(
        self,
        log_dir: Path,
        prefix: str,
        encoding: str = "utf-8",
        backup_count: int = 14,
    ):
        self.log_dir = log_dir
        self.prefix = prefix
        self.backup_count = backup_count
        self.current_date = datetime.now().date()
        super().__init__(str(self._get_filename(self.current_date)), encoding=encoding, delay=True)

    def _get_filename(self, day: date) -> Path:
        return self.log_dir / f"{self.prefix}_{day.strftime('%Y%m%d')}.log"

    def emit(self, record: logging.LogRecord) -> None:
        try:
            today = datetime.now().date()
            if today != self.current_date:
                self.current_date = today
                self.close()
                self.baseFilename = str(self._get_filename(today))
                self.stream = self._open()
                self.cleanup_old_logs()
            super().emit(record)
        except Exception:
            self.handleError(record)

    def cleanup_old_logs(self) -> None:
        if self.backup_count <= 0:
            return
        for log_file in self.log_dir.glob(f"{self.prefix}_*.log"):
            try:
                file_date = datetime.strptime(log_file.stem[len(self.prefix) + 1 :], "%Y%m%d").date()
                if (self.current_date - file_date).days > self.backup_count:
                    log_file.unlink()
            except (ValueError, OSError):
                continue


# =============================================================================
# 로거 설정 및 관리 (싱글톤)
# =============================================================================
class Logger:
    """
    [범용 로거 클래스]

    사용법:
        1. 앱 시작 지점(AppEngine.start)에서 초기화:
            Logger.initialize(app_name="xarb", log_dir=Path("./logs"), level=logging.DEBUG)

        2. 어디서든 가져다 쓰기:
            from utilities.logger import get_logger
            logger = get_logger(__name__)
    """

    _instance: Optional["Logger"] = None
    _root_logger: Optional[logging.Logger] = None
    _initialized = False

    DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
    MESSAGE_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
    ERROR_FORMAT = "%(asctime)s | %(levelname)s | %(pathname)s:%(lineno)d\n%(message)s\n"

    LOG_KEEP_DAYS = 14
    ERROR_LOG_KEEP_DAYS = 30

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    @classmethod
    def initialize(
        cls,
        app_name: str,
        log_dir: Optional[Path],
        level: int = logging.INFO,
        console: bool = True,
    ) -> None:
        """
        로거 초기화 (설정 주입)

        Args:
            app_name: 루트 로거 이름
            log_dir: 로그 파일 폴더. None이면 파일 핸들러를 붙이지 않는다
            level: 기본 로그 레벨
            console: stderr 콘솔 출력 여부
        """
        if cls._initialized:
            return
        cls._initialized = True

        instance = cls()
        root = logging.getLogger(app_name)
        root.setLevel(level)
        root.propagate = False
        root.handlers.clear()
        instance._root_logger = root

        if log_dir is not None:
            try:
                log_dir.mkdir(parents=True, exist_ok=True)
                file_handler = DailyRotatingFileHandler(log_dir, prefix=app_name, backup_count=cls.LOG_KEEP_DAYS)
                file_handler.setLevel(level)
                file_handler.setFormatter(logging.Formatter(cls.MESSAGE_FORMAT, cls.DATE_FORMAT))
                root.addHandler(file_handler)

                error_handler = DailyRotatingFileHandler(log_dir, prefix="error", backup_count=cls.ERROR_LOG_KEEP_DAYS)
                error_handler.setLevel(logging.ERROR)
                error_handler.setFormatter(logging.Formatter(cls.ERROR_FORMAT, cls.DATE_FORMAT))
                root.addHandler(error_handler)
            except OSError as e:
                # 로그 폴더를 못 만들어도 분석 자체는 계속한다
                sys.stderr.write(f"로그 디렉토리 생성 실패: {log_dir} - {e}\n")

        if console:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setLevel(level)
            console_handler.setFormatter(ColorFormatter(cls.MESSAGE_FORMAT, cls.DATE_FORMAT))
            root.addHandler(console_handler)

        cls._suppress_noisy_loggers()
        root.debug(f"Logger initialized for '{app_name}' (log_dir={log_dir})")

    @classmethod
    def reset(cls) -> None:
        """핸들러를 닫고 초기화 이전 상태로 되돌린다. (테스트, 연속 실행용)"""
        instance = cls()
        if instance._root_logger is not None:
            for handler in list(instance._root_logger.handlers):
                handler.close()
                instance._root_logger.removeHandler(handler)
        instance._root_logger = None
        cls._initialized = False

    @staticmethod
    def _suppress_noisy_loggers() -> None:
        for name in ["numpy", "scipy", "urllib3", "matplotlib"]:
            logging.getLogger(name).setLevel(logging.WARNING)

    def _get_child_logger(self, name: str) -> logging.Logger:
        if self._root_logger is None:
            return logging.getLogger(name)
        return self._root_logger.getChild(name)


# =============================================================================
# 공개 함수
# =============================================================================
def get_logger(name: str = __name__) -> logging.Logger:
    """사용자가 사용하는 로거 획득 함수"""
    return Logger()._get_child_logger(name)
