"""Agent interface: wake up, read a committed market view, return a decision."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..book import LobSnapshot, Order, OrderType, Origin, OriginKind, Receipt, Side
from ..exchange.calendar import Phase, SessionCalendar
from ..exchange.rules import PortfolioState


@dataclass
class AgentDecision:
    batch: List[Order] = field(default_factory=list)
    next_wakeup: Optional[int] = None


class MarketView:
    """Read-only window handed to an agent at wakeup.

    Snapshots are the latest committed ones, so nothing newer than the wakeup
    time is visible. Order factories stamp the agent's origin and allocate
    run-unique ids.
    """

    def __init__(self, time: int, calendar: SessionCalendar, snapshot: Callable[[int], LobSnapshot],
                 ref_price: Callable[[int], int], portfolio: PortfolioState, origin: Origin,
                 new_id: Callable[[], int], factor: Optional["FactorState"] = None):
        self.time = time
        self.calendar = calendar
        self.phase = calendar.phase_at(time)
        self.day = calendar.day_at(time)
        self._snapshot = snapshot
        self._ref = ref_price
        self.portfolio = portfolio
        self.origin = origin
        self._new_id = new_id
        self.factor = factor

    def snapshot(self, asset: int) -> LobSnapshot:
        return self._snapshot(asset)

    def reference_price(self, asset: int) -> int:
        return self._ref(asset)

    def mid_or_ref(self, asset: int) -> float:
        m = self._snapshot(asset).mid()
        return self._ref(asset) if m is None else m

    def limit(self, asset: int, side: Side, price: int, volume: int) -> Order:
        return Order(self._new_id(), asset, side, OrderType.LIMIT, int(price), int(volume),
                     self.time, self.origin)

    def market(self, asset: int, side: Side, volume: int) -> Order:
        return Order(self._new_id(), asset, side, OrderType.MARKET, 0, int(volume), self.time, self.origin)

    def cancel(self, asset: int, ref_id: int) -> Order:
        return Order(self._new_id(), asset, Side.BUY, OrderType.CANCEL, recv_time=self.time,
                     origin=self.origin, ref_id=ref_id)

    def trading(self) -> bool:
        return self.phase is Phase.CONTINUOUS or self.phase is Phase.PREOPEN_AUCTION

    def next_open(self, t: int) -> Optional[int]:
        """``t`` if it falls in a tradable phase, else the next tradable session start."""
        for s in self.calendar.sessions:
            if s.end <= t:
                continue
            if s.phase in (Phase.CONTINUOUS, Phase.PREOPEN_AUCTION):
                return max(t, s.start)
        return None


class Agent:
    agent_type = "agent"

    def __init__(self, agent_id: int, rng: np.random.Generator, assets: Sequence[int],
                 cash: int = 0, holdings: Optional[Dict[int, int]] = None, **params):
        self.agent_id = agent_id
        self.rng = rng
        self.assets = list(assets)
        self.cash = int(cash)
        self.holdings = dict(holdings or {})
        self.params = params
        self.origin = Origin(OriginKind.AGENT, agent_id, self.agent_type)
        self.receipts: List[Receipt] = []

    def first_wakeup(self, start: int) -> Optional[int]:
        return start

    def on_wakeup(self, view: MarketView) -> AgentDecision:
        return AgentDecision()

    def on_receipts(self, receipts: Sequence[Receipt]) -> None:
        self.receipts.extend(receipts)
        if len(self.receipts) > 256:
            del self.receipts[:-256]
