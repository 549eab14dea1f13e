# workers/base_worker.py
from __future__ import annotations

from typing import Generic, Optional, TypeVar

from core.events.interfaces import EventBusLike
from core.events.simple_bus import EVENT_BUS, SimpleSignal

R = TypeVar("R")


class BaseWorker(Generic[R]):
    """
    백그라운드 작업을 수행하는 Worker의 기본 클래스이다.
    스레드 제어는 완전히 Service에 위임하고, 오직 비즈니스 로직에만 집중한다.
    작업 상태(성공, 실패)를 시그널로 알린다.

    process()의 반환값이 작업 결과이다. Service는 제출 순서대로 결과를 모은다.
    """

    def __init__(self, bus: Optional[EventBusLike] = None):
        self.log_source = self.__class__.__name__
        self._bus: EventBusLike = bus if bus is not None else EVENT_BUS

        # 시그널은 인스턴스마다 따로 만든다.
        self.worker_started = SimpleSignal()          # 작업 시작 시
        self.worker_finished = SimpleSignal()         # 정상 완료 시
        self.worker_failed = SimpleSignal()           # 에러 발생 시 (메시지)

    # ==========================================================
    # [외부 접근] 로깅
    # ==========================================================
    def log(self, message: str, level: str = "INFO"):
        """EventBus를 통해 로그를 전송한다."""
        self._bus.log.message.emit(self.log_source, message, level)

    def log_info(self, message: str): self.log(message, "INFO")
    def log_warning(self, message: str): self.log(message, "WARNING")
    def log_error(self, message: str): self.log(message, "ERROR")
    def log_debug(self, message: str): self.log(message, "DEBUG")

    # ==========================================================
    # Entry Point
    # ==========================================================
    def run(self) -> R:
        """Service의 스레드 풀에서 호출되는 메인 진입점이다."""

        self.log_debug(f"작업 시작: {self.describe()}")
        self.worker_started.emit()

        try:
            result = self.process()
        except Exception as e:
            self.log_error(f"작업 중 예외 발생: {e}")
            self.worker_failed.emit(str(e))
            raise  # finished 시그널 없이 Service에 실패를 넘긴다

        self.worker_finished.emit()
        return result

    def describe(self) -> str:
        """로그에 남길 작업 설명. 하위 클래스가 덮어쓴다."""
        return self.log_source

    # ==========================================================
    # [하위 클래스 구현부]
    # ==========================================================
    def process(self) -> R:
        """작업 로직을 구현한다."""
        raise NotImplementedError("하위 클래스에서 구현해야 한다.")
