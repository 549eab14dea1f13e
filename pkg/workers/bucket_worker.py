# workers/bucket_worker.py
from __future__ import annotations

from typing import Callable, List, Optional

from core.events.interfaces import EventBusLike
from domain.detector import Bucket, Candidate
from workers.base_worker import BaseWorker


class BucketWorker(BaseWorker[List[Candidate]]):
    """(클래스 쌍) 버킷 하나의 H1-H3 후보 생성"""

    def __init__(
        self,
        fn: Callable[[Bucket], List[Candidate]],
        bucket: Bucket,
        bus: Optional[EventBusLike] = None,
    ):
        super().__init__(bus)
        self._fn = fn
        self.bucket = bucket

    def describe(self) -> str:
        a, b = self.bucket.classes
        return f"bucket {a}/{b} ({len(self.bucket.forward)}+{len(self.bucket.backward)} swaps)"

    def process(self) -> List[Candidate]:
        return self._fn(self.bucket)
