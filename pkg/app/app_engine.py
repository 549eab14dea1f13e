# app/app_engine.py
"""
[앱 엔진 (App Engine)]

애플리케이션의 '심장'이자 '시동 키' 역할을 하는 클래스이다.
프로그램이 시작될 때 가장 먼저 실행되어, 필요한 부품들을 올바른 순서대로 조립한다.

가장 중요한 역할:
    "생성 순서 보장"
    1. 로거(Logger) 먼저 켜기
    2. 그 다음 EventBus 준비
    3. 마지막으로 LogListener 붙이기 (그래야 로그를 놓치지 않음)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from app.bootstrap import build_event_bus
from config.app_config import APP_CONFIG
from core.events.simple_bus import SimpleEventBus
from core.log_listener import LogListener
from utilities.logger import Logger, get_logger


@dataclass
class AppContext:
    """
    앱 전체에서 공유해야 할 중요 객체들을 담아두는 보관함이다.
    """

    event_bus: SimpleEventBus  # 이벤트 버스 (소통 창구)
    log_listener: Optional[LogListener] = None  # 로그 리스너 (기록 담당)


class AppEngine:
    def __init__(self):
        self.logger = get_logger("AppEngine")
        self.ctx: Optional[AppContext] = None  # 보관함은 start() 후에 채워진다.

    def start(
        self,
        debug: bool = False,
        log_dir: Optional[Path] = None,
        log_to_file: Optional[bool] = None,
        fresh_bus: bool = False,
    ) -> AppContext:
        """
        엔진 시동을 건다. 초기화 작업을 수행한다.

        Args:
            debug:       True면 DEBUG 레벨 (settings.ini DEBUG도 같은 효과)
            log_dir:     로그 폴더 (기본: AppPaths.LOG_DIR)
            log_to_file: False면 파일 로그를 끈다 (기본: settings.ini LOG_TO_FILE)
            fresh_bus:   전역 버스 대신 새 버스를 쓴다
        """
        # 0) 로깅 설정 초기화
        # 앱이 시작될 때 가장 먼저 "로그 기록계"를 켜는 단계이다.
        to_file = APP_CONFIG.log_to_file if log_to_file is None else log_to_file
        Logger.initialize(
            app_name=APP_CONFIG.app_name,
            log_dir=(log_dir or APP_CONFIG.paths.LOG_DIR) if to_file else None,
            level=logging.DEBUG if (debug or APP_CONFIG.debug) else logging.INFO,
            console=True,  # stderr
        )
        self.logger = get_logger("AppEngine")

        # 1) EventBus 준비
        bus = build_event_bus(fresh_bus)

        # 2) LogListener 생성 및 연결
        listener = LogListener(bus)

        # 3) AppContext 생성
        self.ctx = AppContext(event_bus=bus, log_listener=listener)
        self.logger.debug(f"{APP_CONFIG.app_name} {APP_CONFIG.version} 시작")
        return self.ctx

    def stop(self) -> None:
        """리스너를 떼어 낸다. 같은 프로세스에서 다시 start()해도 로그가 두 번 찍히지 않는다."""
        if self.ctx is not None and self.ctx.log_listener is not None:
            self.ctx.log_listener.detach()
        self.ctx = None
