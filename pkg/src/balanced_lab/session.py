"""Worker pool lifecycle for a balanced-lab run."""

from __future__ import annotations

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .config import RunConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], pool: Optional[Executor] = None) -> List[R]:
    """Map ``fn`` over ``items``; results keep input order with or without a pool."""
    if pool is None:
        return [fn(item) for item in items]
    return list(pool.map(fn, items))


class LabSession:
    """Owns the thread pool that sampling and scans fan out to."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.pool: Optional[ThreadPoolExecutor] = None

    def start(self) -> None:
        """Create the pool; a single thread means run inline."""
        if self.pool is not None or self.config.threads <= 1:
            return
        self.pool = ThreadPoolExecutor(max_workers=self.config.threads, thread_name_prefix="balanced-lab")
        logger.debug("started pool with %d threads", self.config.threads)

    def stop(self) -> None:
        if self.pool is None:
            return
        try:
            self.pool.shutdown(wait=True)
        finally:
            self.pool = None
            logger.debug("pool stopped")

    @property
    def is_running(self) -> bool:
        return self.pool is not None

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        return ordered_map(fn, items, self.pool)

    def __enter__(self) -> "LabSession":
        self.start()
        return self

    def __exit__(self, _exc_type, _exc_val, _exc_tb) -> None:
        self.stop()
