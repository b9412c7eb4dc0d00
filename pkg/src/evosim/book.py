"""Per-asset limit order book: price-time priority CDA on a heap of FIFO levels.

Prices are integer ticks and volumes integer lots throughout. Each side keeps a
binary heap of level prices (negated for bids), a ``price -> Level`` map, and
per-level FIFO queues. Levels emptied by cancels are deleted lazily: the price
stays in the heap until it surfaces at the top.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


class Side(IntEnum):
    BUY = 1
    SELL = -1

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class OrderType(IntEnum):
    LIMIT = 0
    MARKET = 1
    CANCEL = 2


class OriginKind(str, Enum):
    AGENT = "agent"
    REPLAY = "replay"
    CALIBRATION = "calibration"
    INTERVENTION = "intervention"


@dataclass(frozen=True)
class Origin:
    kind: OriginKind
    agent_id: int = -1
    agent_type: str = ""

    @property
    def label(self) -> str:
        return self.agent_type or self.kind.value


ORIGIN_REPLAY = Origin(OriginKind.REPLAY)
ORIGIN_CALIBRATION = Origin(OriginKind.CALIBRATION, agent_type="calibration")
ORIGIN_INTERVENTION = Origin(OriginKind.INTERVENTION, agent_type="intervention")


@dataclass(slots=True)
class Order:
    id: int
    asset: int
    side: Side
    order_type: OrderType
    price: int = 0
    volume: int = 0
    recv_time: int = 0
    origin: Origin = ORIGIN_REPLAY
    ref_id: int = -1  # target of a Cancel
    live: bool = True

    def validate(self) -> Optional[str]:
        if self.id < 0:
            return "negative id"
        if self.order_type is OrderType.CANCEL:
            return None if self.ref_id >= 0 else "cancel without target id"
        if self.volume < 1:
            return "volume must be >= 1 lot"
        if self.order_type is OrderType.LIMIT and self.price < 1:
            return "limit price must be >= 1 tick"
        return None


@dataclass(frozen=True, slots=True)
class TradeRecord:
    trade_id: int
    asset: int
    price: int
    volume: int
    aggressor_id: int
    resting_id: int
    time: int


class Status(str, Enum):
    RESTING = "resting"
    PARTIAL = "partial"
    FILLED = "filled"
    UNFILLED = "unfilled"  # market residue discarded
    CANCELED = "canceled"
    NOOP = "noop"
    QUEUED = "queued"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    EXPIRED = "expired"


@dataclass(slots=True)
class Receipt:
    order_id: int
    status: Status
    filled: int = 0
    resting: int = 0
    canceled: int = 0
    discarded: int = 0
    reason: Optional[str] = None
    time: int = 0


class Level:
    __slots__ = ("price", "queue", "volume", "count")

    def __init__(self, price: int):
        self.price = price
        self.queue: deque = deque()
        self.volume = 0
        self.count = 0

    def head(self) -> Order:
        q = self.queue
        while not q[0].live:
            q.popleft()
        return q[0]

    def live_orders(self) -> Iterator[Order]:
        return (o for o in self.queue if o.live)


class BookSide:
    """One side of the book. ``sign`` is +1 for asks (min-heap) and -1 for bids."""

    __slots__ = ("sign", "heap", "levels", "in_heap")

    def __init__(self, sign: int):
        self.sign = sign
        self.heap: List[int] = []
        self.levels: Dict[int, Level] = {}
        self.in_heap: set = set()

    def __len__(self) -> int:
        return len(self.levels)

    def best(self) -> Optional[Level]:
        heap, levels = self.heap, self.levels
        while heap:
            lvl = levels.get(heap[0] * self.sign)
            if lvl is not None:
                return lvl
            self.in_heap.discard(heapq.heappop(heap) * self.sign)
        return None

    def level_for_insert(self, price: int) -> Level:
        lvl = self.levels.get(price)
        if lvl is None:
            lvl = self.levels[price] = Level(price)
            if price not in self.in_heap:
                heapq.heappush(self.heap, price * self.sign)
                self.in_heap.add(price)
        return lvl

    def drop_top(self, lvl: Level) -> None:
        # lvl is the current heap top
        heapq.heappop(self.heap)
        self.in_heap.discard(lvl.price)
        del self.levels[lvl.price]

    def drop_lazy(self, lvl: Level) -> None:
        del self.levels[lvl.price]
        if len(self.heap) > 2 * len(self.levels) + 64:
            self.heap = [p * self.sign for p in self.levels]
            heapq.heapify(self.heap)
            self.in_heap = set(self.levels)

    def top(self, n: int) -> List[Level]:
        """Best ``n`` live levels, best first, by best-first search over the heap."""
        heap, levels, sign = self.heap, self.levels, self.sign
        out: List[Level] = []
        size = len(heap)
        if not size or n <= 0:
            return out
        frontier = [(heap[0], 0)]
        while frontier and len(out) < n:
            key, i = heapq.heappop(frontier)
            lvl = levels.get(key * sign)
            if lvl is not None:
                out.append(lvl)
            c = 2 * i + 1
            if c < size:
                heapq.heappush(frontier, (heap[c], c))
                if c + 1 < size:
                    heapq.heappush(frontier, (heap[c + 1], c + 1))
        return out

    def iter_levels(self) -> Iterator[Level]:
        """All live levels best first (lazy)."""
        heap, levels, sign = self.heap, self.levels, self.sign
        size = len(heap)
        if not size:
            return
        frontier = [(heap[0], 0)]
        while frontier:
            key, i = heapq.heappop(frontier)
            lvl = levels.get(key * sign)
            if lvl is not None:
                yield lvl
            c = 2 * i + 1
            if c < size:
                heapq.heappush(frontier, (heap[c], c))
                if c + 1 < size:
                    heapq.heappush(frontier, (heap[c + 1], c + 1))


@dataclass(frozen=True)
class LobSnapshot:
    """Best ``l`` levels as rows ``(bid_price, bid_volume, ask_price, ask_volume)``.

    Absent levels are padded as zeros and exempt from ordering checks.
    """

    levels: Tuple[Tuple[int, int, int, int], ...]
    timestamp: int = 0
    asset: int = 0

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def best_bid(self) -> int:
        return self.levels[0][0] if self.levels else 0

    @property
    def best_ask(self) -> int:
        return self.levels[0][2] if self.levels else 0

    def mid(self) -> Optional[float]:
        """Mid in ticks, or None when either side is empty."""
        b, a = self.best_bid, self.best_ask
        if b <= 0 or a <= 0:
            return None
        return (b + a) / 2.0

    def side_levels(self, side: Side) -> List[Tuple[int, int]]:
        c = 0 if side is Side.BUY else 2
        return [(r[c], r[c + 1]) for r in self.levels if r[c] > 0]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=np.int64).reshape(len(self.levels), 4)

    def flat(self) -> Tuple[int, ...]:
        return tuple(v for row in self.levels for v in row)

    @classmethod
    def from_sides(
        cls,
        bids: Sequence[Tuple[int, int]],
        asks: Sequence[Tuple[int, int]],
        l: int,
        timestamp: int = 0,
        asset: int = 0,
    ) -> "LobSnapshot":
        rows = []
        for i in range(l):
            bp, bv = bids[i] if i < len(bids) else (0, 0)
            ap, av = asks[i] if i < len(asks) else (0, 0)
            rows.append((bp, bv, ap, av))
        return cls(tuple(rows), timestamp, asset)

    @classmethod
    def from_flat(cls, values: Sequence[int], timestamp: int = 0, asset: int = 0) -> "LobSnapshot":
        vals = [int(v) for v in values]
        if len(vals) % 4:
            raise ValueError("snapshot row width must be a multiple of 4")
        rows = tuple(tuple(vals[i:i + 4]) for i in range(0, len(vals), 4))
        return cls(rows, timestamp, asset)

    def violations(self) -> List[str]:
        out = []
        bids = [(r[0], r[1]) for r in self.levels]
        asks = [(r[2], r[3]) for r in self.levels]
        for name, side, dec in (("bid", bids, True), ("ask", asks, False)):
            seen_pad = False
            prev = None
            for i, (p, v) in enumerate(side):
                if v < 0 or p < 0:
                    out.append(f"{name} level {i + 1} negative")
                if p == 0:
                    if v != 0:
                        out.append(f"{name} level {i + 1} volume without price")
                    seen_pad = True
                    continue
                if seen_pad:
                    out.append(f"{name} level {i + 1} follows padding")
                if prev is not None and ((dec and p >= prev) or (not dec and p <= prev)):
                    out.append(f"{name} prices not strictly monotone at level {i + 1}")
                prev = p
        if self.best_bid > 0 and self.best_ask > 0 and self.best_bid >= self.best_ask:
            out.append("crossed book")
        return out


class OrderBook:
    """Single-writer matching operator for one asset."""

    def __init__(self, asset: int = 0):
        self.asset = asset
        self.bids = BookSide(-1)
        self.asks = BookSide(1)
        self.orders: Dict[int, Order] = {}
        self.trade_seq = 0
        self.last_price = 0
        # instrumentation: heap operations on the matching path
        self.level_ops = 0

    def side_of(self, side: Side) -> BookSide:
        return self.bids if side is Side.BUY else self.asks

    def best_bid(self) -> int:
        lvl = self.bids.best()
        return lvl.price if lvl is not None else 0

    def best_ask(self) -> int:
        lvl = self.asks.best()
        return lvl.price if lvl is not None else 0

    def volume_at(self, side: Side, price: int) -> int:
        lvl = self.side_of(side).levels.get(price)
        return lvl.volume if lvl is not None else 0

    # -- matching ---------------------------------------------------------
    def _sweep(self, order: Order, limit: Optional[int], time: int, trades: List[TradeRecord]) -> int:
        buy = order.side is Side.BUY
        opp = self.asks if buy else self.bids
        remaining = order.volume
        orders = self.orders
        while remaining:
            lvl = opp.best()
            if lvl is None:
                break
            if limit is not None and ((buy and lvl.price > limit) or (not buy and lvl.price < limit)):
                break
            q = lvl.queue
            while remaining and lvl.count:
                head = q[0]
                if not head.live:
                    q.popleft()
                    continue
                fill = head.volume if head.volume < remaining else remaining
                head.volume -= fill
                lvl.volume -= fill
                remaining -= fill
                self.trade_seq += 1
                trades.append(TradeRecord(self.trade_seq, self.asset, lvl.price, fill, order.id, head.id, time))
                if head.volume == 0:
                    head.live = False
                    q.popleft()
                    lvl.count -= 1
                    del orders[head.id]
            self.last_price = lvl.price
            if lvl.count == 0:
                opp.drop_top(lvl)
                self.level_ops += 1
        return remaining

    def _rest(self, order: Order, volume: int) -> None:
        side = self.bids if order.side is Side.BUY else self.asks
        n = len(side.levels)
        lvl = side.level_for_insert(order.price)
        if len(side.levels) != n:
            self.level_ops += 1
        order.volume = volume
        order.live = True
        lvl.queue.append(order)
        lvl.volume += volume
        lvl.count += 1
        self.orders[order.id] = order

    def match_limit(self, order: Order, time: Optional[int] = None) -> Tuple[List[TradeRecord], Receipt]:
        t = order.recv_time if time is None else time
        trades: List[TradeRecord] = []
        submitted = order.volume
        remaining = self._sweep(order, order.price, t, trades)
        if remaining:
            self._rest(order, remaining)
            status = Status.RESTING if remaining == submitted else Status.PARTIAL
        else:
            order.volume = 0
            order.live = False
            status = Status.FILLED
        return trades, Receipt(order.id, status, filled=submitted - remaining, resting=remaining, time=t)

    def match_market(self, order: Order, time: Optional[int] = None) -> Tuple[List[TradeRecord], Receipt]:
        t = order.recv_time if time is None else time
        trades: List[TradeRecord] = []
        submitted = order.volume
        remaining = self._sweep(order, None, t, trades)
        order.volume = 0
        order.live = False
        status = Status.FILLED if remaining == 0 else Status.UNFILLED
        return trades, Receipt(order.id, status, filled=submitted - remaining, discarded=remaining, time=t)

    def cancel(self, order_id: int, time: int = 0) -> Receipt:
        o = self.orders.pop(order_id, None)
        if o is None:
            return Receipt(order_id, Status.NOOP, time=time)
        side = self.bids if o.side is Side.BUY else self.asks
        lvl = side.levels[o.price]
        vol = o.volume
        o.live = False
        lvl.volume -= vol
        lvl.count -= 1
        if lvl.count == 0:
            side.drop_lazy(lvl)
        return Receipt(order_id, Status.CANCELED, canceled=vol, time=time)

    def apply(self, order: Order, time: Optional[int] = None) -> Tuple[List[TradeRecord], Receipt]:
        ot = order.order_type
        if ot is OrderType.LIMIT:
            return self.match_limit(order, time)
        if ot is OrderType.MARKET:
            return self.match_market(order, time)
        t = order.recv_time if time is None else time
        return [], self.cancel(order.ref_id, t)

    def rest_without_matching(self, order: Order) -> None:
        """Seed a non-crossing order directly (auction residuals, book loading)."""
        self._rest(order, order.volume)

    # -- observation ------------------------------------------------------
    def snapshot(self, l: int = 10, timestamp: int = 0) -> LobSnapshot:
        if l < 1:
            raise ValueError("snapshot depth must be >= 1")
        bids = [(lv.price, lv.volume) for lv in self.bids.top(l)]
        asks = [(lv.price, lv.volume) for lv in self.asks.top(l)]
        return LobSnapshot.from_sides(bids, asks, l, timestamp, self.asset)

    def resting_volume(self) -> int:
        return sum(o.volume for o in self.orders.values())

    def expire_all(self) -> List[Order]:
        """Remove every resting order (end-of-day expiry); returns them."""
        gone = list(self.orders.values())
        for o in gone:
            o.live = False
        self.orders.clear()
        self.bids = BookSide(-1)
        self.asks = BookSide(1)
        return gone
