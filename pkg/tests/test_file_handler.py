# tests/test_file_handler.py
from __future__ import annotations

import hashlib
from pathlib import Path

import pytest

from core.exceptions import DataError
from managers.run_manifest_manager import MANIFEST_FILE, RunManifestManager, verify_manifest
from utilities.file_exceptions import FileOperationError
from utilities.file_handler import (
    dumps_canonical,
    iter_lines,
    load_csv,
    load_json,
    save_csv,
    save_json,
    save_jsonl,
    sha256_file,
    staged_output_dir,
)


def test_json_is_written_atomically_with_sorted_keys(tmp_path: Path):
    path = tmp_path / "nested" / "out.json"
    save_json(path, {"b": 1, "a": [1, 2]})

    assert load_json(path) == {"a": [1, 2], "b": 1}
    assert path.read_text(encoding="utf-8").index('"a"') < path.read_text(encoding="utf-8").index('"b"')
    # 임시 파일이 남지 않는다
    assert [p.name for p in path.parent.iterdir()] == ["out.json"]


def test_canonical_dump_is_stable():
    assert dumps_canonical({"z": 1, "a": {"y": 2, "b": 3}}) == '{"a":{"b":3,"y":2},"z":1}'


def test_file_errors_are_data_errors(tmp_path: Path):
    with pytest.raises(FileOperationError) as info:
        load_json(tmp_path / "missing.json")
    assert isinstance(info.value, DataError)
    assert info.value.exit_code == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(FileOperationError):
        load_json(bad)


def test_csv_comment_lines_are_skipped(tmp_path: Path):
    path = tmp_path / "t.csv"
    save_csv(path, [["a", "b"], ["1", "x,y"]], comment="xarb-prices v1")

    assert path.read_text(encoding="utf-8").startswith("# xarb-prices v1\n")
    assert load_csv(path) == [["a", "b"], ["1", "x,y"]]


def test_jsonl_lines_are_canonical(tmp_path: Path):
    path = tmp_path / "rows.jsonl"
    save_jsonl(path, [{"b": 2, "a": 1}, {"c": None}])
    assert path.read_text(encoding="utf-8") == '{"a":1,"b":2}\n{"c":null}\n'


def test_sha256_matches_hashlib(tmp_path: Path):
    path = tmp_path / "data.bin"
    path.write_bytes(b"xarb" * 50_000)
    assert sha256_file(path) == hashlib.sha256(b"xarb" * 50_000).hexdigest()


def test_staged_output_moves_files_on_success(tmp_path: Path):
    out = tmp_path / "run"
    with staged_output_dir(out) as stage:
        (stage / "a.txt").write_text("a", encoding="utf-8")
        assert not out.exists()

    assert (out / "a.txt").read_text(encoding="utf-8") == "a"
    assert [p.name for p in tmp_path.iterdir()] == ["run"]


def test_staged_output_leaves_nothing_on_error(tmp_path: Path):
    out = tmp_path / "run"
    with pytest.raises(RuntimeError):
        with staged_output_dir(out) as stage:
            (stage / "a.txt").write_text("a", encoding="utf-8")
            raise RuntimeError("boom")

    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


# =============================================================================
# manifest
# =============================================================================
def test_manifest_records_run_and_detects_tampering(tmp_path: Path, bus):
    a = tmp_path / "a.csv"
    b = tmp_path / "sub" / "b.json"
    save_csv(a, [["x"], ["1"]])
    save_json(b, {"k": 1})

    manager = RunManifestManager("1.0.0", bus)
    manager.begin("detect", seed=5, threads=2)
    manager.add_inputs(tmp_path / "swaps.jsonl", None)
    manager.set_parameters(strict=True)
    target = manager.finish(tmp_path, [a, b])

    assert target.name == MANIFEST_FILE
    manifest = load_json(target)
    assert manifest["subcommand"] == "detect"
    assert manifest["seed"] == 5 and manifest["threads"] == 2
    assert manifest["input_paths"] == [str(tmp_path / "swaps.jsonl")]
    assert manifest["parameters"] == {"strict": True}
    assert sorted(manifest["outputs"]) == ["a.csv", str(Path("sub") / "b.json")]
    assert manifest["finished_at"] is not None
    assert manager.current is None

    assert verify_manifest(tmp_path) == []
    a.write_text("x\n2\n", encoding="utf-8")
    b.unlink()
    assert verify_manifest(tmp_path) == sorted(["a.csv", str(Path("sub") / "b.json")])


def test_manifest_requires_begin(bus):
    with pytest.raises(RuntimeError, match="begin"):
        RunManifestManager("1.0.0", bus).add_inputs(Path("x"))


def test_iter_lines_marks_undecodable_lines(tmp_path: Path):
    path = tmp_path / "mixed.jsonl"
    path.write_bytes(b"first\n\n  \xff\xfe  \r\nthird\r\n")
    assert list(iter_lines(path)) == [(1, "first"), (3, None), (4, "third")]


def test_iter_lines_missing_file(tmp_path: Path):
    with pytest.raises(FileOperationError):
        list(iter_lines(tmp_path / "nope.jsonl"))
