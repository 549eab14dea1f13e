# utilities/file_handler.py
"""
파일 입출력 유틸리티(단순 도구)

예외 발생 시 FileOperationError로 감싸서 호출부에 던진다

호출부는 try-except로 처리한다

모든 쓰기는 같은 폴더의 임시 파일에 먼저 쓰고 os.replace로 교체한다 (원자적 쓰기).
중간에 실패해도 반쯤 쓰인 파일이 남지 않는다.
"""

import csv
import hashlib
import io
import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from utilities.file_exceptions import FileOperationError


# --- 원자적 쓰기 --- #
def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def dumps_canonical(data: Any) -> str:
    """키 정렬 + 공백 없는 JSON 한 줄. 같은 데이터는 항상 같은 바이트가 된다."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# --- JSON --- #
def load_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        raise FileOperationError("JSON 로드 실패", e, path) from e


def save_json(path: Path, data: Dict[str, Any]) -> None:
    try:
        _atomic_write(path, json.dumps(data, indent=4, sort_keys=True, ensure_ascii=False) + "\n")
    except Exception as e:
        raise FileOperationError("JSON 저장 실패", e, path) from e


# --- JSON Lines --- #
def iter_lines(path: Path) -> Iterator[Tuple[int, Optional[str]]]:
    """
    (줄 번호, 줄 내용)을 스트리밍으로 내보낸다. 줄 번호는 1부터.
    빈 줄은 건너뛴다. UTF-8로 읽을 수 없는 줄은 내용 대신 None을 내보낸다.
    파일을 열거나 읽지 못하면 FileOperationError.
    """
    try:
        f = open(path, "rb")
    except OSError as e:
        raise FileOperationError("파일 열기 실패", e, path) from e
    with f:
        line_no = 0
        while True:
            try:
                raw = f.readline()
            except OSError as e:
                raise FileOperationError("파일 읽기 실패", e, path) from e
            if not raw:
                return
            line_no += 1
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                yield line_no, None
                continue
            stripped = text.strip()
            if stripped:
                yield line_no, stripped


def save_jsonl(path: Path, rows: Iterable[Dict[str, Any]]) -> None:
    try:
        buf = io.StringIO()
        for row in rows:
            buf.write(dumps_canonical(row))
            buf.write("\n")
        _atomic_write(path, buf.getvalue())
    except Exception as e:
        raise FileOperationError("JSONL 저장 실패", e, path) from e


# --- 텍스트(문자열) --- #
def load_text(path: Path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except Exception as e:
        raise FileOperationError("텍스트 로드 실패", e, path) from e


def save_text(path: Path, data: str) -> None:
    try:
        _atomic_write(path, data)
    except Exception as e:
        raise FileOperationError("텍스트 저장 실패", e, path) from e


# --- CSV --- #
def load_csv(path: Path) -> List[List[str]]:
    """'#'으로 시작하는 주석 줄(버전 헤더 등)은 건너뛴다."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            lines = [line for line in f if not line.startswith("#")]
        return [row for row in csv.reader(lines) if row]
    except Exception as e:
        raise FileOperationError("CSV 로드 실패", e, path) from e


def save_csv(
    path: Path,
    data: Sequence[Sequence[Any]],
    comment: str | None = None,
) -> None:
    try:
        buf = io.StringIO()
        if comment is not None:
            buf.write(f"# {comment}\n")
        csv.writer(buf, lineterminator="\n").writerows(data)
        _atomic_write(path, buf.getvalue())
    except Exception as e:
        raise FileOperationError("CSV 저장 실패", e, path) from e


# --- 체크섬 / 출력 디렉터리 --- #
def sha256_file(path: Path) -> str:
    try:
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
        return digest.hexdigest()
    except Exception as e:
        raise FileOperationError("체크섬 계산 실패", e, path) from e


@contextmanager
def staged_output_dir(out_dir: Path) -> Iterator[Path]:
    """
    출력 파일을 임시 폴더에 모두 쓴 뒤, 성공했을 때만 out_dir로 옮긴다.
    블록 안에서 예외가 나면 임시 폴더를 지우고 예외를 다시 던진다 (부분 출력 없음).
    """
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.stage.", dir=str(out_dir.parent)))
    except Exception as e:
        raise FileOperationError("임시 출력 폴더 생성 실패", e, out_dir) from e

    try:
        yield stage
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for item in sorted(stage.iterdir()):
            os.replace(item, out_dir / item.name)
    except Exception as e:
        raise FileOperationError("출력 파일 이동 실패", e, out_dir) from e
    finally:
        shutil.rmtree(stage, ignore_errors=True)
