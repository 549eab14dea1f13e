# core/events/simple_bus.py
"""
[EventBus 구현체]

Signal/Slot과 똑같은 사용법(connect, emit)을 가지지만,
내부적으로는 단순한 리스트(List)와 루프(Loop)로 동작한다.

워커는 여러 스레드에서 동시에 emit 할 수 있으므로 핸들러 목록은 잠금으로 보호한다.
핸들러 실행 자체는 emit을 호출한 스레드에서 일어난다.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field, fields
from typing import Any, Callable, List

# Handler: 이벤트를 받을 함수나 메서드의 타입 (어떤 인자든 받고, 뭐든 리턴함)
Handler = Callable[..., Any]


class SimpleSignal:
    """
    Signal을 흉내 낸 클래스이다.
    함수들을 리스트에 저장해뒀다가, emit()이 호출되면 순서대로 실행해준다.
    """

    def __init__(self):
        self._handlers: List[Handler] = []
        self._lock = threading.Lock()

    def connect(self, handler: Handler) -> None:
        """
        [구독하기]
        이미 등록된 함수는 중복해서 등록하지 않는다.
        """
        with self._lock:
            if handler not in self._handlers:
                self._handlers.append(handler)

    def disconnect(self, handler: Handler | None = None) -> None:
        """
        [구독 취소]
        handler가 None이면 모든 구독자를 다 지워버린다.
        """
        with self._lock:
            if handler is None:
                self._handlers.clear()
                return
            if handler in self._handlers:
                self._handlers.remove(handler)

    def emit(self, *args: Any, **kwargs: Any) -> None:
        """
        [방송하기]
        등록된 모든 함수들에게 신호를 보낸다.
        """
        # 실행 중에 누가 구독을 취소해서 리스트 크기가 변할 수 있으므로 복사본을 순회한다.
        with self._lock:
            handlers = list(self._handlers)
        for h in handlers:
            h(*args, **kwargs)

    @property
    def receiver_count(self) -> int:
        with self._lock:
            return len(self._handlers)


# =============================================================================
# 시그널 그룹 정의
# =============================================================================
# 주의: 기본값으로 SimpleSignal()을 직접 쓰면 모든 인스턴스가 같은 시그널을 공유한다.
@dataclass
class _Log:
    # (발생위치, 로그내용, 로그레벨) - 예: emit("DetectionService", "후보 120건", "INFO")
    message: SimpleSignal = field(default_factory=SimpleSignal)


@dataclass
class _Pipeline:
    # (단계 이름) - 예: emit("detect")
    stage_started: SimpleSignal = field(default_factory=SimpleSignal)
    # (단계 이름, 처리 건수)
    stage_finished: SimpleSignal = field(default_factory=SimpleSignal)
    # (단계 이름, 사유, 건수) - 예: emit("load_swaps", "schema", 3)
    records_skipped: SimpleSignal = field(default_factory=SimpleSignal)


# =============================================================================
# 메인 클래스
# =============================================================================
class SimpleEventBus:
    """앱 전체의 이벤트 버스이다."""

    def __init__(self):
        self.log = _Log()
        self.pipeline = _Pipeline()

        # 전체 관리를 위한 리스트
        self._signal_groups: List[Any] = [self.log, self.pipeline]

    def disconnect_all(self, signal_name: str | None = None) -> None:
        """모든 연결을 끊어버린다. (초기화나 종료 시 유용)"""
        for group in self._signal_groups:
            for f in fields(group):
                sig = getattr(group, f.name)
                if isinstance(sig, SimpleSignal):
                    if signal_name is None or f.name == signal_name:
                        sig.disconnect()


# 전역 이벤트 버스 (import 시점에 한 번 생성)
EVENT_BUS = SimpleEventBus()
