# tests/test_event_bus.py
from __future__ import annotations

import logging
import threading

import pytest

from core.events.simple_bus import SimpleEventBus, SimpleSignal
from core.log_listener import LogListener


def test_signal_connect_emit_disconnect():
    sig = SimpleSignal()
    got = []

    def handler(*args):
        got.append(args)

    sig.connect(handler)
    sig.connect(handler)  # 중복 등록은 무시
    assert sig.receiver_count == 1

    sig.emit(1, "a")
    sig.disconnect(handler)
    sig.emit(2, "b")
    sig.disconnect(handler)  # 없는 핸들러는 조용히 넘어간다

    assert got == [(1, "a")]
    assert sig.receiver_count == 0


def test_handler_may_disconnect_itself_during_emit():
    sig = SimpleSignal()
    calls = []

    def once():
        calls.append("once")
        sig.disconnect(once)

    sig.connect(once)
    sig.connect(lambda: calls.append("always"))
    sig.emit()
    sig.emit()

    assert calls == ["once", "always", "always"]


def test_emit_from_many_threads():
    sig = SimpleSignal()
    lock = threading.Lock()
    total = [0]

    def add(n):
        with lock:
            total[0] += n

    sig.connect(add)
    threads = [threading.Thread(target=lambda: [sig.emit(1) for _ in range(500)]) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert total[0] == 4000


def test_bus_instances_do_not_share_signals():
    a, b = SimpleEventBus(), SimpleEventBus()
    a.log.message.connect(print)
    assert b.log.message.receiver_count == 0


def test_disconnect_all_by_name():
    bus = SimpleEventBus()
    bus.log.message.connect(print)
    bus.pipeline.stage_started.connect(print)

    bus.disconnect_all("stage_started")
    assert bus.pipeline.stage_started.receiver_count == 0
    assert bus.log.message.receiver_count == 1

    bus.disconnect_all()
    assert bus.log.message.receiver_count == 0


def test_log_listener_forwards_levels(caplog: pytest.LogCaptureFixture):
    bus = SimpleEventBus()
    LogListener(bus)
    caplog.set_level(logging.DEBUG)

    bus.log.message.emit("DetectionService", "후보 12건", "WARNING")
    bus.log.message.emit("PathChunkWorker", "이상한 레벨", "verbose")

    records = [r for r in caplog.records if r.name == "LogListener"]
    assert (records[-2].levelno, records[-2].getMessage()) == (logging.WARNING, "[DetectionService] 후보 12건")
    assert records[-1].levelno == logging.INFO
    assert records[-1].getMessage() == "[verbose] [PathChunkWorker] 이상한 레벨"


def test_log_listener_reports_pipeline_events(caplog: pytest.LogCaptureFixture):
    bus = SimpleEventBus()
    listener = LogListener(bus)
    caplog.set_level(logging.DEBUG)

    bus.pipeline.stage_finished.emit("detect", 7)
    bus.pipeline.records_skipped.emit("load_swaps", "schema", 3)
    assert "stage finished: detect (7 records)" in caplog.text
    assert "load_swaps: skipped 3 record(s) (schema)" in caplog.text

    listener.detach()
    assert bus.log.message.receiver_count == 0
    assert bus.pipeline.records_skipped.receiver_count == 0
