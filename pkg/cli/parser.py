# cli/parser.py
"""
[명령행 파서]

    xarb [공통 옵션] <명령> [하위 명령] [옵션]

공통 옵션(--seed, --threads, --strict, --debug, --log-dir, --no-log-file)은
명령 앞뒤 어디에 써도 된다. 잘못된 인자는 종료 대신 UsageError를 던진다.
"""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence

from core.exceptions import UsageError
from domain.accounting import VolumeConvention

PROG = "xarb"

GLOBAL_DEFAULTS: Dict[str, Any] = {
    "seed": None,
    "threads": None,
    "strict": False,
    "debug": False,
    "log_dir": None,
    "no_log_file": False,
}


class XarbArgumentParser(argparse.ArgumentParser):
    """argparse의 exit(2) 대신 UsageError (종료 코드 1)"""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _common_options() -> argparse.ArgumentParser:
    # 하위 파서에서도 받을 수 있도록 기본값은 SUPPRESS (상위 파서 값을 덮어쓰지 않게)
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("공통 옵션")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="난수 seed (기본: 0 / 시나리오 파일 값)")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="병렬 스레드 수 (기본: XARB_THREADS 또는 1)")
    g.add_argument("--strict", action="store_true", default=argparse.SUPPRESS, help="잘못된 입력 줄에서 즉시 중단")
    g.add_argument("--debug", action="store_true", default=argparse.SUPPRESS, help="DEBUG 로그")
    g.add_argument("--log-dir", type=Path, default=argparse.SUPPRESS, help="로그 폴더")
    g.add_argument("--no-log-file", action="store_true", default=argparse.SUPPRESS, help="파일 로그 끄기")
    return common


def _add_out(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--out", type=Path, required=required, help="출력 폴더")


def _build_model(sub: Any, common: argparse.ArgumentParser) -> None:
    model = sub.add_parser("model", parents=[common], help="폐형식 모델 곡선과 Monte Carlo 검증")
    msub = model.add_subparsers(dest="model_command", metavar="<curve>", parser_class=XarbArgumentParser)
    msub.required = True

    p = msub.add_parser("profit-curve", parents=[common], help="p에 따른 차익 이익")
    p.add_argument("--p-grid", default="1:3:41", help="start:stop:points (기본 1:3:41)")
    p.add_argument("--reserve", type=float, default=1e7, help="R^A (기본 1e7)")
    p.add_argument("--mu", type=float, help="브릿지 지연 반영 시 드리프트")
    p.add_argument("--delta", type=float, help="브릿지 지연 반영 시 Δ")
    _add_out(p)

    p = msub.add_parser("bridge-cost", parents=[common], help="Δ에 따른 브릿지 비용 C^BR")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=-0.0625)
    p.add_argument("--delta-grid", default="0:2:41")
    _add_out(p)

    p = msub.add_parser("thresholds", parents=[common], help="λ*(Δ)와 Δ*(λ) 곡선")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=-0.0625)
    p.add_argument("--delta-grid", default="0.05:2:40")
    p.add_argument("--lambda-grid", default="0.1:4:40")
    _add_out(p)

    p = msub.add_parser("cost-diff", parents=[common], help="μ에 따른 비용 차이와 교차 드리프트")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--mu-grid", default="-0.2:0:41")
    p.add_argument("--mu-lo", type=float, default=-1.0, help="가정이 깨질 때 교차점을 찾을 하한")
    _add_out(p)

    p = msub.add_parser("validate", parents=[common], help="폐형식 vs Monte Carlo")
    p.add_argument("--bridge-paths", type=int, default=1_000_000)
    p.add_argument("--inventory-paths", type=int, default=200_000)
    p.add_argument("--sigma", type=float, default=0.2, help="브릿지 경우의 σ")
    p.add_argument("--phi", type=float, default=10.0, help="유한 유동성 배수 φ")
    _add_out(p)


def _build_stats(sub: Any, common: argparse.ArgumentParser) -> None:
    stats = sub.add_parser("stats", parents=[common], help="CSV 열 통계")
    ssub = stats.add_subparsers(dest="stats_command", metavar="<test>", parser_class=XarbArgumentParser)
    ssub.required = True

    p = ssub.add_parser("welch", parents=[common], help="두 열의 Welch t 검정")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--a", required=True, help="표본 A 열")
    p.add_argument("--b", required=True, help="표본 B 열")
    p.add_argument("--csv-b", type=Path, help="표본 B가 다른 파일에 있을 때")

    p = ssub.add_parser("pearson", parents=[common], help="두 열의 Pearson 상관")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)

    p = ssub.add_parser("volatility", parents=[common], help="일별 ln(고가/저가)")
    p.add_argument("--prices", type=Path, required=True)
    p.add_argument("--class", dest="cls", required=True, help="자산 클래스")
    p.add_argument("--daily", type=Path, help="daily.csv (주어지면 변동성과의 상관을 낸다)")
    p.add_argument("--column", default="count", help="daily.csv에서 상관을 볼 열")
    p.add_argument("--out", type=Path, help="volatility.csv 경로")

    p = ssub.add_parser("split", parents=[common], help="daily.csv 전후 Welch 비교")
    p.add_argument("--daily", type=Path, required=True)
    p.add_argument("--date", required=True, help="YYYY-MM-DD (이 날짜부터 '후')")


def build_parser() -> XarbArgumentParser:
    common = _common_options()
    parser = XarbArgumentParser(
        prog=PROG,
        parents=[common],
        description="교차 체인 차익거래 모델 / 시뮬레이션 / 탐지 / 회계 도구",
    )
    sub = parser.add_subparsers(dest="command", metavar="<command>", parser_class=XarbArgumentParser)
    sub.required = True

    _build_model(sub, common)

    p = sub.add_parser("simulate", parents=[common], help="시나리오 → 합성 체인 이벤트 + 정답")
    p.add_argument("--config", type=Path, required=True, help="시나리오 JSON")
    p.add_argument("--collision-rate", type=float, help="교란 스왑 쌍 비율 (시나리오 값 덮어쓰기)")
    _add_out(p)

    p = sub.add_parser("detect", parents=[common], help="스왑 → 차익거래 매치 + 실행 방식")
    p.add_argument("--input-dir", type=Path, help="simulate 출력 폴더 (파일 이름 규약 사용)")
    p.add_argument("--swaps", type=Path)
    p.add_argument("--raw-swaps", type=Path, help="홉 단위 스왑 이벤트 (트랜잭션별로 집계)")
    p.add_argument("--transfers", type=Path)
    p.add_argument("--native-links", type=Path)
    p.add_argument("--equivalence", type=Path)
    p.add_argument("--labels", type=Path)
    p.add_argument("--chains", type=Path)
    p.add_argument("--truth", type=Path, help="정답 파일 (정밀도/재현율 계산)")
    p.add_argument("--no-truth", action="store_true", help="--input-dir의 truth.jsonl을 쓰지 않는다")
    p.add_argument("--config", type=Path, help="탐지기 설정 JSON (settings.ini 값을 덮어씀)")
    p.add_argument(
        "--calibrate", nargs="?", const="0.01,0.005,0.001", metavar="THRESHOLDS",
        help="H2 상한 비교표 (쉼표 구분, 기본 0.01,0.005,0.001)",
    )
    _add_out(p)

    p = sub.add_parser("account", parents=[common], help="매치 → USD 이익과 집계")
    p.add_argument("--matches", type=Path, required=True)
    p.add_argument("--input-dir", type=Path, help="prices/equivalence/chains가 있는 폴더")
    p.add_argument("--prices", type=Path)
    p.add_argument("--equivalence", type=Path)
    p.add_argument("--chains", type=Path)
    p.add_argument(
        "--volume", choices=[c.value for c in VolumeConvention], default=VolumeConvention.LEG1_IN.value,
        help="거래량 기준 (기본 leg1_in)",
    )
    p.add_argument("--split-date", help="YYYY-MM-DD 전후 일별 지표 Welch 비교")
    _add_out(p)

    p = sub.add_parser("eval", parents=[common], help="매치 vs 정답: 정밀도 / 재현율 / 분류 정확도")
    p.add_argument("--matches", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    _add_out(p, required=False)

    _build_stats(sub, common)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    for name, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, default)
    return args


def command_name(args: argparse.Namespace) -> str:
    parts: List[str] = [args.command]
    for attr in ("model_command", "stats_command"):
        value = getattr(args, attr, None)
        if value:
            parts.append(value)
    return " ".join(parts)
