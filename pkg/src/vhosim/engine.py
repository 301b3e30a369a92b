"""Deterministic discrete-event core: clock, ordered event queue, named RNG streams."""

from __future__ import annotations

import heapq
import random
from typing import Any, Callable


class SchedulingError(Exception):
    """An event was scheduled in the past, or the clock was asked to go backwards."""


# A scheduled event is the bare heap entry [fire_at, seq, callback, args];
# it doubles as the cancellation handle. callback=None marks it dead.
EventHandle = list


class Simulator:
    """Single-threaded event loop with an exact, reproducible execution order.

    Times are seconds (float). Events with equal fire time execute in
    scheduling order (a monotone sequence number breaks ties), so a fixed
    program yields a bit-identical event order on every run. Schedulers must
    derive fire times arithmetically (t0 + k*dt), never by accumulating
    increments.
    """

    def __init__(self, seed: int = 1, trace_sink: list[str] | None = None):
        self.now = 0.0
        self.seed = seed
        self.executed = 0
        self._heap: list[list] = []
        self._seq = 0
        self._rngs: dict[str, random.Random] = {}
        self._trace = trace_sink

    # -- random streams ----------------------------------------------------

    def rng(self, stream_id: str) -> random.Random:
        """One independent generator per consumer.

        The same (seed, stream_id) pair yields the identical draw sequence,
        and adding a new consumer never perturbs existing streams.
        """
        r = self._rngs.get(stream_id)
        if r is None:
            r = random.Random(f"{self.seed}/{stream_id}")
            self._rngs[stream_id] = r
        return r

    # -- scheduling --------------------------------------------------------

    def schedule_at(self, fire_at: float, callback: Callable, *args: Any) -> EventHandle:
        if fire_at < self.now:
            raise SchedulingError(f"schedule at t={fire_at} in the past (now={self.now})")
        entry = [fire_at, self._seq, callback, args]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return entry

    def schedule_in(self, delay: float, callback: Callable, *args: Any) -> EventHandle:
        return self.schedule_at(self.now + delay, callback, *args)

    def cancel(self, handle: EventHandle) -> bool:
        """True iff the event was still pending and is now removed."""
        if handle[2] is None:
            return False
        handle[2] = None
        handle[3] = ()
        return True

    def run_until(self, end: float) -> int:
        """Execute all events with fire_at <= end; afterwards now == end."""
        if end < self.now:
            raise SchedulingError(f"run_until({end}) behind clock {self.now}")
        count = 0
        heap = self._heap
        pop = heapq.heappop
        while heap and heap[0][0] <= end:
            entry = pop(heap)
            callback = entry[2]
            if callback is None:  # cancelled
                continue
            entry[2] = None  # consumed; the handle is no longer pending
            self.now = entry[0]
            callback(*entry[3])
            count += 1
        self.now = end
        self.executed += count
        return count

    # -- event log ---------------------------------------------------------

    def trace(self, node: str, module: str, kind: str, detail: str = "") -> None:
        if self._trace is not None:
            line = f"{self.now:.9f} {node} {module} {kind}"
            if detail:
                line = f"{line} {detail}"
            self._trace.append(line)
