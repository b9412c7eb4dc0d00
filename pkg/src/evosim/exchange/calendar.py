"""Trading-day calendar with session phases.

Each day is an ordered, contiguous list of ``(phase, [start, end))`` windows
measured in ns from the run epoch; day ``d`` starts at ``d * 24h``.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple

from ..kernel import NS_PER_S

NS_PER_DAY = 86_400 * NS_PER_S


class Phase(str, Enum):
    PREOPEN_AUCTION = "preopen_auction"
    CONTINUOUS = "continuous"
    INTRADAY_BREAK = "intraday_break"
    EOD_CLEARING = "eod_clearing"
    CLOSED = "closed"


# A-share day: the auction window runs up to the continuous open so sessions stay contiguous.
A_SHARE_SESSIONS: Tuple[Tuple[str, str, str], ...] = (
    ("preopen_auction", "09:15", "09:30"),
    ("continuous", "09:30", "11:30"),
    ("intraday_break", "11:30", "13:00"),
    ("continuous", "13:00", "15:00"),
    ("eod_clearing", "15:00", "15:05"),
)


def parse_clock(hhmm: str) -> int:
    parts = [int(x) for x in hhmm.split(":")]
    if len(parts) == 2:
        parts.append(0)
    h, m, s = parts
    if not (0 <= h < 24 and 0 <= m < 60 and 0 <= s < 60):
        raise ValueError(f"bad clock time {hhmm!r}")
    return ((h * 60 + m) * 60 + s) * NS_PER_S


def format_clock(ns_of_day: int) -> str:
    s = ns_of_day // NS_PER_S
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


@dataclass(frozen=True)
class Session:
    phase: Phase
    start: int
    end: int
    day: int


@dataclass
class SessionCalendar:
    days: List[str]
    template: Sequence[Tuple[str, str, str]] = A_SHARE_SESSIONS
    sessions: List[Session] = field(init=False)

    def __post_init__(self) -> None:
        if not self.days:
            raise ValueError("calendar needs at least one trading day")
        if len(set(self.days)) != len(self.days) or list(self.days) != sorted(self.days):
            raise ValueError("trading days must be strictly ordered")
        rows = [(Phase(p), parse_clock(a), parse_clock(b)) for p, a, b in self.template]
        for (_, _, end), (_, start, _) in zip(rows, rows[1:]):
            if end != start:
                raise ValueError("sessions within a day must be contiguous")
        for ph, a, b in rows:
            if b <= a:
                raise ValueError(f"empty session {ph.value}")
            if ph is Phase.CLOSED:
                raise ValueError("closed is implicit outside sessions")
        self.sessions = []
        for d in range(len(self.days)):
            base = d * NS_PER_DAY
            self.sessions.extend(Session(ph, base + a, base + b, d) for ph, a, b in rows)
        self._starts = [s.start for s in self.sessions]

    @property
    def end_time(self) -> int:
        return self.sessions[-1].end

    def session_at(self, t: int) -> Optional[Session]:
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0:
            return None
        s = self.sessions[i]
        return s if t < s.end else None

    def phase_at(self, t: int) -> Phase:
        s = self.session_at(t)
        return Phase.CLOSED if s is None else s.phase

    def day_at(self, t: int) -> int:
        return min(max(t // NS_PER_DAY, 0), len(self.days) - 1)

    def day_sessions(self, day: int) -> List[Session]:
        return [s for s in self.sessions if s.day == day]

    def transitions(self) -> Iterator[Tuple[int, int, Phase]]:
        """(time, day, phase entered) for every boundary, including the close."""
        for i, s in enumerate(self.sessions):
            yield s.start, s.day, s.phase
            nxt = self.sessions[i + 1] if i + 1 < len(self.sessions) else None
            if nxt is None or nxt.start != s.end:
                yield s.end, s.day, Phase.CLOSED

    def opening_auction_time(self, day: int) -> Optional[int]:
        """Start of the first continuous session that follows an auction window."""
        prev = None
        for s in self.day_sessions(day):
            if s.phase is Phase.CONTINUOUS and prev is Phase.PREOPEN_AUCTION:
                return s.start
            prev = s.phase
        return None

    def checkpoints(self, cadence_ns: int) -> List[int]:
        """Multiples of the cadence strictly inside continuous sessions."""
        out = []
        for s in self.sessions:
            if s.phase is not Phase.CONTINUOUS:
                continue
            t = (s.start // cadence_ns + 1) * cadence_ns
            while t < s.end:
                out.append(t)
                t += cadence_ns
        return out

    def at_clock(self, day: int, hhmm: str) -> int:
        return day * NS_PER_DAY + parse_clock(hhmm)
