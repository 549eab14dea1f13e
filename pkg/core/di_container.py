# core/di_container.py
"""
[의존성 주입(Dependency Injection) 컨테이너 안내서]

Q1. 이 파일은 왜 존재하는가?
명령 처리기들은 여러 Service(비즈니스 로직)와 Manager(실행 상태)를 필요로 한다.
각자 Service를 만들면 스레드 수, 엄격 모드, 탐지기 기본값 같은 설정이 곳곳에 흩어진다.
이 파일(AppContainer)은 시스템 전체에서 쓰일 '공통 부품들'을 한 곳에서 조립하는 '부품 공장 도면' 역할을 한다.

Q2. 이것을 어떻게 활용하는가?
1. 공통 Manager / Service는 `providers.Singleton`으로 등록한다. (한 번의 실행에 하나만 존재)
2. 명령행에서 정해지는 값(스레드 수, --strict 등)은 `config` 에 넣는다:
       container.config.from_dict({"threads": 4, "strict": True})
   값을 넣은 뒤 처음 꺼내는 Service부터 그 값으로 만들어진다.
3. 테스트에서는 `container.event_bus.override(providers.Object(bus))` 로 버스를 바꿔 끼운다.
"""
from decimal import Decimal

from dependency_injector import containers, providers

from config.app_config import APP_CONFIG, AppConfig
from core.events.simple_bus import EVENT_BUS
from domain.accounting import VolumeConvention
from domain.detector import DetectorConfig
from managers.run_manifest_manager import RunManifestManager
from services.accounting_service import AccountingService
from services.detection_service import DetectionService
from services.model_service import ModelService
from services.simulation_service import SimulationService
from services.statistics_service import StatisticsService


def detector_defaults(app_config: AppConfig) -> DetectorConfig:
    """settings.ini [Detector] 값 → DetectorConfig"""
    return DetectorConfig(
        marginal_threshold=Decimal(app_config.marginal_threshold),
        dedup_marginal=Decimal(app_config.dedup_marginal),
        dedup_gap_seconds=app_config.dedup_gap_seconds,
        window_stable_seconds=app_config.window_stable_seconds,
        window_other_seconds=app_config.window_other_seconds,
        clock_skew_tolerance=app_config.clock_skew_tolerance,
    )


class AppContainer(containers.DeclarativeContainer):
    """
    Service와 그들이 의존하는 설정/버스가 어떻게 결합되어야 하는지 명세해 놓은 '최상위 부품 공장'
    """

    # ==========================================================
    # 0. 실행 설정 (명령행에서 채워짐)
    # ==========================================================
    config = providers.Configuration(
        default={"threads": 1, "strict": False, "convention": VolumeConvention.LEG1_IN.value}
    )

    # ==========================================================
    # 1. 공용 객체
    # ==========================================================
    event_bus = providers.Object(EVENT_BUS)
    app_config = providers.Object(APP_CONFIG)

    # 명령마다 --config로 덮어쓸 수 있으므로 Factory
    detector_config = providers.Factory(detector_defaults, app_config=app_config)

    # ==========================================================
    # 2. Managers (싱글톤)
    # ==========================================================
    run_manifest_manager = providers.Singleton(
        RunManifestManager,
        version=app_config.provided.version,
        bus=event_bus,
    )

    # ==========================================================
    # 3. Services (싱글톤)
    # ==========================================================
    model_service = providers.Singleton(
        ModelService,
        bus=event_bus,
        threads=config.threads,
        chunk_paths=app_config.provided.chunk_paths,
        bisection_tol=app_config.provided.bisection_tol,
        bisection_max_iter=app_config.provided.bisection_max_iter,
        steps_per_unit=app_config.provided.default_steps_per_unit,
    )

    simulation_service = providers.Singleton(SimulationService, bus=event_bus, threads=config.threads)

    detection_service = providers.Singleton(
        DetectionService,
        bus=event_bus,
        threads=config.threads,
        config=detector_config,
        strict=config.strict,
    )

    accounting_service = providers.Singleton(
        AccountingService,
        bus=event_bus,
        threads=config.threads,
        strict=config.strict,
        convention=providers.Factory(VolumeConvention, config.convention),
    )

    statistics_service = providers.Singleton(StatisticsService, bus=event_bus)
