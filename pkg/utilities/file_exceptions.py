# utilities/file_exceptions.py

from pathlib import Path

from core.exceptions import DataError


class FileOperationError(DataError):
    """
    파일 입출력 과정에서 발생하는 예외를 도메인 특화 예외로 캡슐화(Wrapping)

    호출부는 FileNotFoundError, PermissionError, UnicodeDecodeError 등을 각각 잡는 대신
    FileOperationError 하나만 처리하면 된다. 원본 예외(original)와 경로(path)가 함께 실려 있으므로
    로그에 원인을 정확히 남길 수 있다. DataError를 상속하므로 CLI 종료 코드는 2이다.

    사용 예:
        from utilities.file_handler import load_json

        def load_scenario(self, path: Path):
            try:
                return load_json(path)
            except FileOperationError as e:
                if isinstance(e.original, FileNotFoundError):
                    raise ConfigError(f"시나리오 파일 없음: {e.path}") from e
                raise
    """

    def __init__(self, message: str, original_exc: Exception, path: Path):
        super().__init__(f"{message}: {path} ({type(original_exc).__name__}: {original_exc})")
        self.original = original_exc
        self.path = path
