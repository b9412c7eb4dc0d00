"""Quote updater: refreshes a small ladder around the prevailing mid."""
from __future__ import annotations

from typing import List, Optional

from ..book import Side
from ..exchange.calendar import Phase
from ..kernel import NS_PER_S
from .base import Agent, AgentDecision, MarketView


class QuoteUpdater(Agent):
    """Every ``period_s`` cancels its previous quotes and posts ``levels`` buys
    at ``center - k - i`` and sells at ``center + k + i``, where ``center`` is
    the rounded mid shifted by a uniform integer in ``[-jitter, jitter]``.
    """

    agent_type = "quote"

    def __init__(self, *a, period_s=3.0, k=1, size=5, levels=1, jitter=0, phase_s=0.0, **kw):
        super().__init__(*a, **kw)
        self.period = int(float(period_s) * NS_PER_S)
        self.phase_offset = int(float(phase_s) * NS_PER_S)
        self.k = int(k)
        self.size = int(size)
        self.levels = int(levels)
        self.jitter = int(jitter)
        self.quotes: List[int] = []

    def first_wakeup(self, start: int) -> Optional[int]:
        return start + self.phase_offset

    def on_wakeup(self, view: MarketView) -> AgentDecision:
        now = view.time
        if view.phase is not Phase.CONTINUOUS:
            nxt = view.next_open(now + 1)
            while nxt is not None and view.calendar.phase_at(nxt) is not Phase.CONTINUOUS:
                nxt = view.next_open(view.calendar.session_at(nxt).end)
            return AgentDecision([], nxt)
        asset = self.assets[0]
        batch = [view.cancel(asset, oid) for oid in self.quotes]
        center = int(round(view.mid_or_ref(asset)))
        if self.jitter:
            center += int(self.rng.integers(-self.jitter, self.jitter + 1))
        self.quotes = []
        for i in range(self.levels):
            b = view.limit(asset, Side.BUY, max(center - self.k - i, 1), self.size)
            s = view.limit(asset, Side.SELL, center + self.k + i, self.size)
            batch += [b, s]
            self.quotes += [b.id, s.id]
        return AgentDecision(batch, now + self.period)
