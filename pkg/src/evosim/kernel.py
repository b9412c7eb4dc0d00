"""Discrete-event kernel: clock, latency, and the two-level time-slice scheduler.

Event time is integer nanoseconds from a per-run epoch. Every event carries a
``seq`` drawn from one global monotone counter at creation, so ``(due_time, seq)``
is a strict total order and runs replay deterministically.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, Dict, List, Optional, Tuple

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


class EventKind(IntEnum):
    ORDER_ARRIVAL = 0
    CANCEL = 1
    EXCHANGE_RESPONSE = 2
    AGENT_WAKEUP = 3
    SESSION_TRANSITION = 4
    ORACLE_TRIGGER = 5
    RECORDING_CHECKPOINT = 6


class CausalityError(ValueError):
    """Raised when an event would be scheduled before the kernel clock."""


class Event:
    __slots__ = ("due_time", "seq", "kind", "payload")

    def __init__(self, due_time: int, seq: int, kind: EventKind, payload: Any = None):
        self.due_time = due_time
        self.seq = seq
        self.kind = kind
        self.payload = payload

    @property
    def key(self) -> Tuple[int, int]:
        return (self.due_time, self.seq)

    def __repr__(self) -> str:
        return f"Event(t={self.due_time}, seq={self.seq}, {self.kind.name})"


class _End:
    def __repr__(self) -> str:
        return "SimulationEnd"

    def __bool__(self) -> bool:
        return False


SIMULATION_END = _End()


@dataclass
class LatencyModel:
    """Propagation delay in ns, optionally per (sender-class, receiver-class)."""

    default_ns: int = 0
    overrides: Dict[Tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.default_ns < 0 or any(v < 0 for v in self.overrides.values()):
            raise ValueError("latency must be non-negative")

    def delay(self, sender: str = "", receiver: str = "") -> int:
        if self.overrides:
            return self.overrides.get((sender, receiver), self.default_ns)
        return self.default_ns


class SliceSchedule:
    """Timeline partitioned into slices of width ``delta``; one local heap per slice.

    Non-empty slice ids are kept in their own min-heap so that long empty
    stretches (lunch breaks, nights) are skipped in O(log S).
    """

    def __init__(self, delta: int):
        if delta <= 0:
            raise ValueError("slice width must be positive")
        self.delta = delta
        self.slices: Dict[int, List[Tuple[int, int, Event]]] = {}
        self._slice_ids: List[int] = []
        self.cursor = 0
        self.size = 0
        # instrumentation
        self.inserts = 0
        self.slice_index_pushes = 0
        self.max_slice_occupancy = 0

    def __len__(self) -> int:
        return self.size

    def insert(self, ev: Event) -> int:
        b = ev.due_time // self.delta
        local = self.slices.get(b)
        if local is None:
            local = self.slices[b] = []
            heapq.heappush(self._slice_ids, b)
            self.slice_index_pushes += 1
        heapq.heappush(local, (ev.due_time, ev.seq, ev))
        self.size += 1
        self.inserts += 1
        if len(local) > self.max_slice_occupancy:
            self.max_slice_occupancy = len(local)
        return b

    def peek(self) -> Optional[Event]:
        """Minimum event without removing it (drops exhausted slices)."""
        while self._slice_ids:
            b = self._slice_ids[0]
            local = self.slices[b]
            if local:
                return local[0][2]
            heapq.heappop(self._slice_ids)
            del self.slices[b]
        return None

    def current_slice_nonempty(self) -> bool:
        local = self.slices.get(self.cursor)
        return bool(local)

    def pop_current(self) -> Event:
        ev = heapq.heappop(self.slices[self.cursor])[2]
        self.size -= 1
        return ev

    def advance(self) -> bool:
        """Move the cursor to the next non-empty slice; False if none remain."""
        while self._slice_ids:
            b = self._slice_ids[0]
            if self.slices[b]:
                if b < self.cursor:
                    raise AssertionError("slice cursor moved backward")
                self.cursor = b
                return True
            heapq.heappop(self._slice_ids)
            del self.slices[b]
        return False


class Kernel:
    """Single-threaded dispatch loop state: clock, seq counter, slice schedule.

    ``on_slice_end(boundary_ns)`` is invoked once whenever a visited slice has
    been fully drained, before the next slice is entered; it is the hook used
    for synchronization-point commits and may schedule new events.
    """

    def __init__(
        self,
        slice_width_ns: int = 100 * NS_PER_MS,
        latency: Optional[LatencyModel] = None,
        horizon_end: Optional[int] = None,
        on_slice_end: Optional[Callable[[int], None]] = None,
    ):
        self.schedule = SliceSchedule(slice_width_ns)
        self.latency = latency or LatencyModel()
        self.horizon_end = horizon_end
        self.on_slice_end = on_slice_end
        self.now = 0
        self._seq = 0
        self._started = False
        self.events_dispatched = 0
        self.slices_visited = 0

    # -- scheduling -------------------------------------------------------
    def _new_event(self, due_time: int, kind: EventKind, payload: Any) -> Event:
        ev = Event(due_time, self._seq, kind, payload)
        self._seq += 1
        self.schedule.insert(ev)
        return ev

    def schedule_at(self, due_time: int, kind: EventKind, payload: Any = None) -> Event:
        if due_time < self.now:
            raise CausalityError(f"event at {due_time} precedes kernel time {self.now}")
        return self._new_event(due_time, kind, payload)

    def send(
        self,
        payload: Any,
        kind: EventKind,
        send_time: int,
        latency: Optional[LatencyModel] = None,
        sender: str = "",
        receiver: str = "",
    ) -> Event:
        if send_time < self.now:
            raise CausalityError(f"send at {send_time} precedes kernel time {self.now}")
        lat = (latency or self.latency).delay(sender, receiver)
        return self._new_event(send_time + lat, kind, payload)

    def schedule_wakeup(self, agent_id: int, at: int) -> Event:
        return self.schedule_at(at, EventKind.AGENT_WAKEUP, agent_id)

    # -- dispatch ---------------------------------------------------------
    def peek_time(self) -> Optional[int]:
        ev = self.schedule.peek()
        return None if ev is None else ev.due_time

    def next_event(self):
        sched = self.schedule
        if not self._started:
            self._started = True
            if not sched.advance():
                return SIMULATION_END
            self.slices_visited += 1
        while True:
            if sched.current_slice_nonempty():
                top = sched.slices[sched.cursor][0]
                if self.horizon_end is not None and top[0] > self.horizon_end:
                    return SIMULATION_END
                ev = sched.pop_current()
                self.now = ev.due_time
                self.events_dispatched += 1
                return ev
            if self.on_slice_end is not None:
                boundary = (sched.cursor + 1) * sched.delta
                self.on_slice_end(boundary)
                if sched.current_slice_nonempty():
                    continue
            if not sched.advance():
                return SIMULATION_END
            self.slices_visited += 1

    def counters(self) -> Dict[str, int]:
        return {
            "events_dispatched": self.events_dispatched,
            "slices_visited": self.slices_visited,
            "max_slice_occupancy": self.schedule.max_slice_occupancy,
        }
