# core/log_listener.py
"""
[로그 리스너 (Log Listener)]

EventBus에서 날아오는 '로그 이벤트(log.message)'를 잡아서,
실제 '로거(Logger)'에게 전달하는 중재자(Mediator) 역할이다.

장점:
    1. Logger는 EventBus를 몰라도 된다. (순수 파이썬 로거 유지)
    2. EventBus는 로깅이 어떻게 되는지 몰라도 된다. (그저 신호만 보낼 뿐)
    3. 이 녀석이 중간에서 둘을 이어준다. -> 결합도 감소!

파이프라인 진행 이벤트(pipeline.*)도 DEBUG 레벨로 남긴다.
"""
from __future__ import annotations

import logging

from core.events.interfaces import EventBusLike
from utilities.logger import get_logger

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


class LogListener:
    def __init__(self, bus: EventBusLike):
        """
        리스너를 생성하면서 EventBus에 귀를 기울인다(connect).

        Args:
            bus: EventBus 객체
        """
        # utilities.logger.get_logger를 사용해야 Logger.initialize로 설정한 핸들러를 물려받는다.
        self.logger = get_logger("LogListener")
        self._bus = bus

        self._bus.log.message.connect(self.on_log_message)
        self._bus.pipeline.stage_started.connect(self.on_stage_started)
        self._bus.pipeline.stage_finished.connect(self.on_stage_finished)
        self._bus.pipeline.records_skipped.connect(self.on_records_skipped)

        self.logger.debug("LogListener initialized")

    def detach(self) -> None:
        self._bus.log.message.disconnect(self.on_log_message)
        self._bus.pipeline.stage_started.disconnect(self.on_stage_started)
        self._bus.pipeline.stage_finished.disconnect(self.on_stage_finished)
        self._bus.pipeline.records_skipped.disconnect(self.on_records_skipped)

    def on_log_message(self, source: str, message: str, level: str) -> None:
        """
        실제 로그 이벤트가 발생했을 때 호출되는 함수(Slot)이다.

        Args:
            source: 로그를 보낸 녀석 (예: "DetectionService", "PathChunkWorker")
            message: 로그 내용
            level: 중요도 ("DEBUG", "INFO", "ERROR" 등)
        """
        level_no = _LEVELS.get(level.upper())
        if level_no is None:
            # 모르는 레벨은 INFO로 처리하면서 레벨 이름을 앞에 붙여준다.
            self.logger.info(f"[{level}] [{source}] {message}")
            return
        self.logger.log(level_no, f"[{source}] {message}")

    def on_stage_started(self, stage: str) -> None:
        self.logger.debug(f"stage started: {stage}")

    def on_stage_finished(self, stage: str, count: int) -> None:
        self.logger.debug(f"stage finished: {stage} ({count} records)")

    def on_records_skipped(self, stage: str, reason: str, count: int) -> None:
        self.logger.warning(f"{stage}: skipped {count} record(s) ({reason})")
