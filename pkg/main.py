# main.py
"""
[메인 엔트리 포인트]

xarb 명령의 시작점이다.

    python main.py model validate --out runs/validate
    xarb detect --input-dir runs/sim --out runs/detect      (pyproject 스크립트)
"""
import sys
from typing import List, Optional

from dependency_injector import providers

from app.app_engine import AppEngine
from app.bootstrap import resolve_thread_count
from cli.commands import HANDLERS
from cli.parser import command_name, parse_args
from core.di_container import AppContainer
from core.exceptions import EXIT_INTERNAL, UsageError, XarbError
from utilities.logger import Logger, get_logger


def run(argv: Optional[List[str]] = None, container: Optional[AppContainer] = None) -> int:
    """
    명령 하나를 실행하고 종료 코드를 돌려준다.

    - 도메인 예외(XarbError)는 그 예외의 exit_code
    - 그 밖의 예외는 traceback을 남기고 3
    """
    try:
        args = parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return e.exit_code
    except SystemExit as e:  # --help
        return int(e.code or 0)

    # 1. 앱 엔진 시동 (Logger → EventBus → LogListener)
    engine = AppEngine()
    ctx = engine.start(debug=args.debug, log_dir=args.log_dir, log_to_file=False if args.no_log_file else None)
    logger = get_logger("main")

    try:
        # 2. 컨테이너 준비: 실행 설정을 넣고 현재 버스를 끼운다
        if container is None:
            container = AppContainer()
        container.event_bus.override(providers.Object(ctx.event_bus))
        container.config.from_dict(
            {
                "threads": resolve_thread_count(args.threads),
                "strict": args.strict,
                "convention": getattr(args, "volume", "leg1_in"),
            }
        )
        container.reset_singletons()

        # 이 과정이 있어야 @inject 와 Provide 가 정상적으로 작동한다.
        container.wire(modules=["cli.commands"])

        # 3. 하위 명령 실행
        name = command_name(args)
        logger.debug(f"명령 시작: {name}")
        code = HANDLERS[args.command](args)
        logger.debug(f"명령 종료: {name} (코드 {code})")
        return code
    except XarbError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception:
        logger.exception("내부 오류")
        return EXIT_INTERNAL
    finally:
        if container is not None:
            container.unwire()
            container.event_bus.reset_override()
        engine.stop()
        Logger.reset()


if __name__ == "__main__":
    sys.exit(run())
