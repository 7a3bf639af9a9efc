"""Timestamp sources. Injectable so deterministic runs stay byte-stable."""

from __future__ import annotations

import threading
from datetime import datetime, timezone


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class TickClock:
    """Logical clock: one second per call, starting at the epoch.

    Used for replay runs so that exported logs and stores are identical
    across executions.
    """

    def __init__(self):
        self._ticks = 0
        self._lock = threading.Lock()

    def __call__(self) -> str:
        with self._lock:
            tick = self._ticks
            self._ticks += 1
        return datetime.fromtimestamp(tick, tz=timezone.utc).isoformat(timespec="seconds")
