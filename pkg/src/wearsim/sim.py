"""Deterministic discrete-event kernel: every event is totally ordered by
(time, priority, insertion sequence), so runs are reproducible regardless of
how components interleave their scheduling."""

from __future__ import annotations

import heapq
import itertools


class Priority:
    COMMAND = 0
    SAMPLE = 1
    HOP = 2
    LINK = 3
    REPORT = 4


class Scheduler:
    def __init__(self):
        self._heap: list = []
        self._counter = itertools.count()
        self.now_us: float = 0.0

    def schedule(self, time_us: float, priority: int, callback) -> None:
        if time_us < self.now_us:
            raise ValueError(f"cannot schedule into the past ({time_us} < {self.now_us})")
        heapq.heappush(self._heap, (time_us, priority, next(self._counter), callback))

    def schedule_in(self, delay_us: float, priority: int, callback) -> None:
        self.schedule(self.now_us + delay_us, priority, callback)

    def empty(self) -> bool:
        return not self._heap

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end_us: float, before_event=None) -> None:
        """Dispatch events up to and including t_end_us. before_event, when
        given, is called with the event time before each dispatch (used for
        piecewise-constant integration such as the energy ledger)."""
        while self._heap and self._heap[0][0] <= t_end_us:
            time_us, _prio, _seq, callback = heapq.heappop(self._heap)
            self.now_us = time_us
            if before_event:
                before_event(time_us)
            callback(time_us)
        if before_event:
            before_event(t_end_us)
        self.now_us = t_end_us
