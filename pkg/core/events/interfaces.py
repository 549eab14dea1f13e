# core/events/interfaces.py
"""
[이벤트 버스 프로토콜]

Service, Worker, Manager는 구체 클래스(SimpleEventBus) 대신 이 프로토콜에만 의존한다.
구조적 타이핑(Protocol)이므로 같은 모양의 속성만 있으면 테스트용 버스도 그대로 넣을 수 있다.

    bus.log.message.emit(source, message, level)
    bus.pipeline.stage_finished.emit("detect", 120)
"""
from __future__ import annotations

from typing import Any, Callable, Protocol

Handler = Callable[..., Any]


class SignalLike(Protocol):
    def connect(self, handler: Handler) -> None:
        """핸들러 등록 (같은 핸들러는 한 번만)"""
        ...

    def disconnect(self, handler: Handler | None = None) -> None:
        """핸들러 해제. None이면 전부."""
        ...

    def emit(self, *args: Any, **kwargs: Any) -> None:
        ...


class LogGroupLike(Protocol):
    message: SignalLike


class PipelineGroupLike(Protocol):
    stage_started: SignalLike
    stage_finished: SignalLike
    records_skipped: SignalLike


class EventBusLike(Protocol):
    log: LogGroupLike
    pipeline: PipelineGroupLike

    def disconnect_all(self, signal_name: str | None = None) -> None:
        """이름이 같은 시그널(없으면 전부)의 연결을 끊는다. 종료 시와 테스트 사이에 쓴다."""
        ...
