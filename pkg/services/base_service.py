# services/base_service.py
from __future__ import annotations

from concurrent.futures import Future, ThreadPoolExecutor, wait
from typing import Callable, List, Optional, Sequence, TypeVar

from core.events.interfaces import EventBusLike
from core.events.simple_bus import EVENT_BUS
from workers.base_worker import BaseWorker

R = TypeVar("R")


class BaseService:
    """
    비즈니스 로직 및 Worker 실행을 관리하는 Service이다.
    공통적인 설정이나 리소스 관리, 스레드 관리를 수행한다.

    워커 결과는 언제나 제출 순서대로 돌려준다. 스레드 수가 달라도 결과 순서와
    그 뒤의 합산 순서가 같으므로 출력이 바뀌지 않는다.
    """

    def __init__(self, bus: Optional[EventBusLike] = None, threads: int = 1):
        # 로그 소스 이름 설정 (클래스 이름 자동 사용)
        self.log_source = self.__class__.__name__
        self._bus: EventBusLike = bus if bus is not None else EVENT_BUS
        self.threads = max(1, int(threads))

    @property
    def bus(self) -> EventBusLike:
        return self._bus

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
    # [외부 접근] 파이프라인 진행 알림
    # ==========================================================
    def stage_started(self, stage: str) -> None:
        self._bus.pipeline.stage_started.emit(stage)

    def stage_finished(self, stage: str, count: int) -> None:
        self._bus.pipeline.stage_finished.emit(stage, count)

    def records_skipped(self, stage: str, reason: str, count: int) -> None:
        if count:
            self._bus.pipeline.records_skipped.emit(stage, reason, count)

    # ==========================================================
    # [외부 접근] 워커 실행
    # ==========================================================
    def run_workers(self, workers: Sequence[BaseWorker[R]]) -> List[R]:
        """
        워커들을 스레드 풀에서 실행하고 결과를 제출 순서대로 돌려준다.

        하나라도 실패하면 나머지가 모두 끝난 뒤 첫 번째(제출 순서 기준) 예외를 다시 던진다.
        스레드가 1개이거나 워커가 1개면 호출 스레드에서 바로 실행한다.
        """
        if not workers:
            return []
        if self.threads == 1 or len(workers) == 1:
            return [w.run() for w in workers]

        with ThreadPoolExecutor(max_workers=min(self.threads, len(workers))) as pool:
            futures: List[Future[R]] = [pool.submit(w.run) for w in workers]
            wait(futures)

        failures = [(i, f.exception()) for i, f in enumerate(futures) if f.exception() is not None]
        if failures:
            index, exc = failures[0]
            self.log_error(f"워커 {len(failures)}개 실패 (첫 실패: #{index})")
            assert exc is not None
            raise exc
        return [f.result() for f in futures]

    def mapper(self, make_worker: Callable[..., BaseWorker[R]]) -> Callable[..., List[R]]:
        """
        도메인 계층의 (fn, items) -> [결과] 매퍼 자리에 끼울 수 있는 함수를 만든다.
        make_worker(fn, item, bus) 로 항목마다 워커를 만든다.
        """

        def _map(fn: Callable[..., R], items: Sequence[object]) -> List[R]:
            return self.run_workers([make_worker(fn, item, self._bus) for item in items])

        return _map
