# workers/path_worker.py
from __future__ import annotations

from typing import Optional

from core.events.interfaces import EventBusLike
from domain.stochastic import ChunkFn, ChunkSpec, Moments
from workers.base_worker import BaseWorker


class PathChunkWorker(BaseWorker[Moments]):
    """Monte Carlo 경로 묶음 하나. 묶음의 난수 스트림은 chunk.index로 고정된다."""

    def __init__(self, fn: ChunkFn, chunk: ChunkSpec, bus: Optional[EventBusLike] = None):
        super().__init__(bus)
        self._fn = fn
        self.chunk = chunk

    def describe(self) -> str:
        return f"chunk #{self.chunk.index} ({self.chunk.size} paths)"

    def process(self) -> Moments:
        return self._fn(self.chunk)
