"""Clock abstraction: real time for demos, simulated time for tests.

A simulated clock makes whole fleet runs deterministic and lets a minute
of plant behaviour execute in milliseconds; the ingest service accepts the
same clock so receive times and command expiry line up with the stations.
"""

from __future__ import annotations

import time


class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimClock:
    """Manually advanced clock; never moves backwards."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance_to(self, when: float) -> None:
        if when > self._now:
            self._now = when

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self._now += seconds
