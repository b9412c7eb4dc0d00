"""Open-loop synthetic order source for throughput and breadth experiments."""
from __future__ import annotations

from typing import List, Optional

import numpy as np

from ..book import Order, Side
from ..kernel import NS_PER_MS, NS_PER_S
from .base import Agent, AgentDecision, MarketView


class StressSource(Agent):
    """Emits exactly ``rate * duration_s`` orders per asset at evenly spaced times.

    The mix ignores the book: limits at a fixed ``mid`` minus a signed offset in
    ``[-2, 9]`` ticks (so some cross), market orders and cancels of recent own
    limits. Orders are handed out in ``batch_ms`` windows with their exact send
    times stamped in ``recv_time``.
    """

    agent_type = "stress"

    def __init__(self, *a, rate=200.0, duration_s=10.0, mid=1000, start=0, batch_ms=100,
                 p_limit=0.55, p_market=0.10, **kw):
        super().__init__(*a, **kw)
        self.rate = float(rate)
        self.duration = float(duration_s)
        self.mid = int(mid)
        self.start = int(start)
        self.batch = int(batch_ms) * NS_PER_MS
        self.p_limit = float(p_limit)
        self.p_market = float(p_market)
        n = int(round(self.rate * self.duration))
        self.n_per_asset = n
        per = [self._plan(n) for _ in self.assets]
        # merged schedule: (time, asset index, plan row)
        self.times = []
        for k, plan in enumerate(per):
            for i in range(n):
                self.times.append((plan[0][i], k, plan[1][i], plan[2][i], plan[3][i], plan[4][i]))
        self.times.sort(key=lambda r: (r[0], r[1]))
        self.cursor = 0
        self.recent: List[List[int]] = [[] for _ in self.assets]

    @property
    def emitted_total(self) -> int:
        return self.n_per_asset * len(self.assets)

    def _plan(self, n: int):
        step = NS_PER_S / self.rate if self.rate > 0 else 0
        times = [self.start + int(i * step) for i in range(n)]
        u = self.rng.random(n)
        side = np.where(self.rng.random(n) < 0.5, 1, -1)
        off = self.rng.integers(-2, 10, n)
        size = self.rng.integers(1, 11, n)
        return times, u.tolist(), side.tolist(), off.tolist(), size.tolist()

    def first_wakeup(self, start: int) -> Optional[int]:
        if not self.times:
            return None
        return max(start, self.times[0][0])

    def on_wakeup(self, view: MarketView) -> AgentDecision:
        now = view.time
        horizon = now + self.batch
        batch: List[Order] = []
        times = self.times
        while self.cursor < len(times) and times[self.cursor][0] < horizon:
            t, k, u, sd, off, size = times[self.cursor]
            self.cursor += 1
            asset = self.assets[k]
            side = Side.BUY if sd > 0 else Side.SELL
            recent = self.recent[k]
            if u < self.p_limit or not recent:
                o = view.limit(asset, side, self.mid - sd * off, size)
                recent.append(o.id)
                if len(recent) > 50:
                    del recent[0]
            elif u < self.p_limit + self.p_market:
                o = view.market(asset, side, max(1, size // 2))
            else:
                o = view.cancel(asset, recent[int(size * 7 + off) % len(recent)])
            o.recv_time = max(t, now)
            batch.append(o)
        nxt = None
        if self.cursor < len(times):
            nxt = max(horizon, times[self.cursor][0])
        return AgentDecision(batch, nxt)
