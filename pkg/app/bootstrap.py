# app/bootstrap.py
"""
[부트스트랩 (Bootstrap)]

'부트스트랩'은 원래 '장화 끈을 스스로 당겨 일어선다'는 뜻인데,
프로그래밍에서는 '가장 기초적인 설정을 잡는 단계'를 말한다.

여기서는 실행에 쓸 EventBus를 꺼내주고, 병렬 스레드 수를 정한다.
"""
from __future__ import annotations

from typing import Optional

from config.app_config import AppConfig
from core.events.simple_bus import EVENT_BUS, SimpleEventBus
from core.exceptions import ConfigError


def build_event_bus(fresh: bool = False) -> SimpleEventBus:
    """
    EventBus를 출고해준다.

    - 기본: 전역 EVENT_BUS (Service들이 기본값으로 쓰는 버스와 같은 것)
    - fresh=True: 새 버스 (테스트에서 다른 실행과 섞이지 않게 할 때)
    """
    return SimpleEventBus() if fresh else EVENT_BUS


def resolve_thread_count(cli_threads: Optional[int]) -> int:
    """--threads > XARB_THREADS > 1 순서로 정한다."""
    if cli_threads is not None:
        if cli_threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {cli_threads}")
        return cli_threads
    return AppConfig.env_threads() or 1
