"""Opening call auction: one clearing price maximizing executable volume."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

from ..book import Order, OrderBook, OrderType, Side, TradeRecord


@dataclass
class AuctionResult:
    asset: int
    clearing_price: int
    volume: int
    executions: List[TradeRecord] = field(default_factory=list)
    # (order_id, filled) for every order that traded
    fills: List[Tuple[int, int]] = field(default_factory=list)


def clearing_price(buys: Sequence[Tuple[int, int]], sells: Sequence[Tuple[int, int]], p_ref: int) -> Tuple[int, int]:
    """(price, executable volume) for ``(price, volume)`` limit interest.

    Ties on volume go to the smaller imbalance, then the tick nearest ``p_ref``,
    then the lower tick. Demand and supply are step functions that only change
    at order prices, so apart from the order prices themselves the only ticks
    worth testing are the ones nearest ``p_ref`` inside each gap.
    """
    if not buys or not sells:
        return p_ref, 0
    bp = sorted(p for p, _ in buys)
    sp = sorted(p for p, _ in sells)
    b_sorted = sorted(buys)
    s_sorted = sorted(sells)
    b_cum = [0]
    for _, v in b_sorted:
        b_cum.append(b_cum[-1] + v)
    s_cum = [0]
    for _, v in s_sorted:
        s_cum.append(s_cum[-1] + v)
    total_b = b_cum[-1]

    def demand(p: int) -> int:
        return total_b - b_cum[bisect.bisect_left(bp, p)]

    def supply(p: int) -> int:
        return s_cum[bisect.bisect_right(sp, p)]

    marks = sorted(set(bp) | set(sp))
    cands = set(marks)
    for lo, hi in zip(marks, marks[1:]):
        if hi - lo > 1:
            cands.add(min(max(p_ref, lo + 1), hi - 1))
    best = None
    for p in cands:
        d, s = demand(p), supply(p)
        key = (-min(d, s), abs(d - s), abs(p - p_ref), p)
        if best is None or key < best:
            best = key
    vol = -best[0]
    if vol == 0:
        return p_ref, 0
    return best[3], vol


def run_call_auction(book: OrderBook, preopen: Sequence[Order], p_ref: int, time: int) -> AuctionResult:
    """Clear resting plus queued limit orders at one price and reseed the book.

    Orders already resting in ``book`` keep time priority over ``preopen``,
    which must be in arrival order. Executions pair the highest-priority buy
    with the highest-priority sell (price first, then time); the buyer is
    recorded as ``aggressor_id``. Residuals rest without matching, which is
    safe because no residual buy can be priced at or above a residual sell
    without contradicting volume maximality.
    """
    resting = _resting_in_time_order(book)
    pool = resting + [o for o in preopen if o.order_type is OrderType.LIMIT and o.volume > 0]
    book.expire_all()
    buys = [o for o in pool if o.side is Side.BUY]
    sells = [o for o in pool if o.side is Side.SELL]
    price, vol = clearing_price([(o.price, o.volume) for o in buys],
                                [(o.price, o.volume) for o in sells], p_ref)
    res = AuctionResult(book.asset, price, vol)
    if vol:
        rank = {o.id: i for i, o in enumerate(pool)}
        eb = sorted((o for o in buys if o.price >= price), key=lambda o: (-o.price, rank[o.id]))
        es = sorted((o for o in sells if o.price <= price), key=lambda o: (o.price, rank[o.id]))
        filled = {}
        left = vol
        i = j = 0
        while left:
            b, s = eb[i], es[j]
            q = min(b.volume, s.volume, left)
            b.volume -= q
            s.volume -= q
            left -= q
            book.trade_seq += 1
            res.executions.append(TradeRecord(book.trade_seq, book.asset, price, q, b.id, s.id, time))
            filled[b.id] = filled.get(b.id, 0) + q
            filled[s.id] = filled.get(s.id, 0) + q
            if b.volume == 0:
                i += 1
            if s.volume == 0:
                j += 1
        res.fills = sorted(filled.items())
        book.last_price = price
    for o in pool:
        if o.volume > 0:
            book.rest_without_matching(o)
        else:
            o.live = False
    return res


def _resting_in_time_order(book: OrderBook) -> List[Order]:
    # FIFO inside a level is time order; across levels fall back to receive time then id
    out = []
    for side in (book.bids, book.asks):
        for lvl in side.levels.values():
            out.extend(lvl.live_orders())
    out.sort(key=lambda o: (o.recv_time, o.id))
    return out
