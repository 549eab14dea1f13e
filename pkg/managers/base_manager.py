# managers/base_manager.py
from __future__ import annotations

from typing import Optional

from core.events.interfaces import EventBusLike
from core.events.simple_bus import EVENT_BUS


class BaseManager:
    """
    애플리케이션의 공통 상태(State)와 데이터를 보관/관리하는 매니저의 기본 클래스
    여러 Service와 명령 처리기에 주입(Injection)되어 공통의 진실 공급원(Single Source of Truth) 역할을 한다.

    질문:
        - "컴포넌트간의 결합도를 낮추고 이벤트를 전달하는 것"은 이벤트 버스를 사용해도 할 수 있는데 왜 또 매니저 파일을 만드나?

    답:
        - [이벤트 버스]
            - 특징: 배달원. 메세지를 전달만 할 뿐 데이터를 저장하지 않는다.
            - 사용: 앱 공통 일회성 사건(Event)
                - 예: "로그 출력", "단계 시작/완료", "잘못된 줄 건너뜀"

        - [매니저]
            - 특징: 데이터 저장소. 한 번의 실행 동안 쌓이는 상태를 들고 있다.
            - 범위: 범위 제한. 필요한 곳의 생성자로 주입된다. 추적이 쉽다.
            - 사용: 실행 공통 상태(State)
                - 예: 이번 실행의 입력 파일 목록, seed, 만들어진 출력 파일 (→ manifest.json)
    """

    def __init__(self, bus: Optional[EventBusLike] = None):
        # 로그 소스 이름 설정 (클래스 이름 자동 사용)
        self.log_source = self.__class__.__name__
        self._bus: EventBusLike = bus if bus is not None else EVENT_BUS

    # ==========================================================
    # [외부 접근] 로깅
    # ==========================================================
    def log(self, message: str, level: str = "INFO"):
        """EventBus를 통해 로그를 전송한다."""
        self._bus.log.message.emit(self.log_source, message, level)

    def log_info(self, message: str):
        self.log(message, "INFO")

    def log_warning(self, message: str):
        self.log(message, "WARNING")

    def log_error(self, message: str):
        self.log(message, "ERROR")

    def log_debug(self, message: str):
        self.log(message, "DEBUG")
