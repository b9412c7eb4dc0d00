"""Zero-intelligence noise trader."""
from __future__ import annotations

import math
from collections import deque
from typing import Optional

from ..book import Side
from ..kernel import NS_PER_S
from .base import Agent, AgentDecision, MarketView


class ZIAgent(Agent):
    """Poisson wakeups; uniform side; geometric tick offset from mid; lognormal size.

    Params: ``rate`` wakeups per second, ``p_geom`` success probability of the
    offset draw, ``size_mu``/``size_sigma`` of log-lots, ``p_market`` share of
    market orders, ``ttl_s`` after which unfilled limits are canceled.
    """

    agent_type = "zi"

    def __init__(self, *a, rate=0.2, p_geom=0.3, size_mu=1.0, size_sigma=1.0, p_market=0.1,
                 ttl_s=60.0, **kw):
        super().__init__(*a, **kw)
        self.rate = float(rate)
        self.p_geom = float(p_geom)
        self.size_mu = float(size_mu)
        self.size_sigma = float(size_sigma)
        self.p_market = float(p_market)
        self.ttl = int(float(ttl_s) * NS_PER_S)
        self.live: deque = deque()  # (expiry, asset, order_id)

    def _gap(self) -> int:
        return max(1, int(self.rng.exponential(1.0 / self.rate) * NS_PER_S))

    def first_wakeup(self, start: int) -> Optional[int]:
        if self.rate <= 0:
            return None
        return start + self._gap()

    def on_wakeup(self, view: MarketView) -> AgentDecision:
        if self.rate <= 0:
            return AgentDecision()
        now = view.time
        if not view.trading():
            nxt = view.next_open(now)
            return AgentDecision([], None if nxt is None else nxt + self._gap())
        batch = []
        while self.live and self.live[0][0] <= now:
            _, asset, oid = self.live.popleft()
            batch.append(view.cancel(asset, oid))
        asset = self.assets[int(self.rng.integers(len(self.assets)))]
        side = Side.BUY if self.rng.random() < 0.5 else Side.SELL
        size = max(1, int(round(math.exp(self.rng.normal(self.size_mu, self.size_sigma)))))
        offset = int(self.rng.geometric(self.p_geom)) - 1
        use_market = self.rng.random() < self.p_market
        if side is Side.SELL:
            size = min(size, view.portfolio.h_avail.get(asset, 0))
            if size == 0:
                return AgentDecision(batch, now + self._gap())
        mid = view.mid_or_ref(asset)
        if use_market and view.phase.value == "continuous":
            batch.append(view.market(asset, side, size))
        else:
            price = math.floor(mid) - offset if side is Side.BUY else math.ceil(mid) + offset
            o = view.limit(asset, side, max(price, 1), size)
            batch.append(o)
            self.live.append((now + self.ttl, asset, o.id))
        return AgentDecision(batch, now + self._gap())
