"""Deterministic discrete-event core.

Time is kept in integer nanoseconds. Events are ordered by ``(fire_at, seq)``
where ``seq`` is a global insertion counter, so events scheduled for the same
instant fire in the order they were scheduled.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import SchedulingInPast

NS_PER_S = 1_000_000_000
NS_PER_MS = 1_000_000
NS_PER_US = 1_000


def seconds(value) -> int:
    return int(round(value * NS_PER_S))


def millis(value) -> int:
    return int(round(value * NS_PER_MS))


@dataclass(eq=False)
class SimEvent:
    fire_at: int
    seq: int
    callback: Callable[..., Any]
    args: tuple = ()
    target: str = ""
    kind: str = ""
    cancelled: bool = field(default=False, repr=False)
    fired: bool = field(default=False, repr=False)

    def __lt__(self, other: "SimEvent") -> bool:
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)

    @property
    def pending(self) -> bool:
        return not (self.cancelled or self.fired)


EventHandle = SimEvent


class Simulator:
    """Event queue plus simulated clock.

    Intra-node hand-offs use :meth:`call_soon`, which schedules at the current
    instant; the insertion counter keeps cause before effect.
    """

    def __init__(self, seed: int = 0):
        self.now = 0
        self.seed = int(seed)
        self._queue: list[SimEvent] = []
        self._seq = 0
        self._streams: dict[Any, np.random.Generator] = {}
        self.processed = 0

    def schedule(self, fire_at: int, callback, *args, target="", kind="") -> SimEvent:
        fire_at = int(fire_at)
        if fire_at < self.now:
            raise SchedulingInPast(f"fire_at={fire_at} < now={self.now}")
        ev = SimEvent(fire_at, self._seq, callback, args, target, kind)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay: int, callback, *args, **kw) -> SimEvent:
        return self.schedule(self.now + int(delay), callback, *args, **kw)

    def call_soon(self, callback, *args, **kw) -> SimEvent:
        return self.schedule(self.now, callback, *args, **kw)

    def cancel(self, handle: SimEvent | None) -> bool:
        if handle is None or not handle.pending:
            return False
        # Lazy deletion: the heap entry is skipped when popped.
        handle.cancelled = True
        return True

    def peek(self) -> int | None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].fire_at if self._queue else None

    def step(self) -> bool:
        nxt = self.peek()
        if nxt is None:
            return False
        ev = heapq.heappop(self._queue)
        self.now = ev.fire_at
        ev.fired = True
        self.processed += 1
        ev.callback(*ev.args)
        return True

    def run_until(self, t: int) -> int:
        """Process every event with ``fire_at <= t``; the clock ends at ``t``."""
        t = int(t)
        if t < self.now:
            raise SchedulingInPast(f"run_until({t}) < now={self.now}")
        count = 0
        while True:
            nxt = self.peek()
            if nxt is None or nxt > t:
                break
            self.step()
            count += 1
        self.now = t
        return count

    def run(self, limit: int | None = None) -> int:
        """Run to exhaustion (or until ``limit`` ns); returns events processed."""
        count = 0
        while True:
            nxt = self.peek()
            if nxt is None or (limit is not None and nxt > limit):
                break
            self.step()
            count += 1
        return count

    def __len__(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def rng(self, stream: int) -> np.random.Generator:
        """Independent generator for one stochastic consumer (one per link)."""
        gen = self._streams.get(stream)
        if gen is None:
            ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1), spawn_key=(int(stream),))
            gen = np.random.Generator(np.random.PCG64(ss))
            self._streams[stream] = gen
        return gen
