"""Greedy synthesis of corrective order flow toward a target snapshot.

The synthesizer plans on a small copy of the top of the book that keeps
per-order FIFO queues, so every planned order can be replayed against the real
matching operator with the same result. Gap entries are visited largest first;
each visit emits one atomic fix:

* a missing target level is added, with any crossing opposite depth swept by
  the same marketable limit order;
* surplus depth is removed by canceling calibration-owned orders first, then by
  an opposite marketable limit whose volume consumes exactly the better levels
  plus the surplus, after which the better levels are re-added at target depth;
* a level the target does not have is removed the same way.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from ..book import ORIGIN_CALIBRATION, LobSnapshot, Order, OrderBook, OrderType, OriginKind, Side
from .gap import ASK, BID, compute_gap


@dataclass(frozen=True)
class Budget:
    max_orders: int
    max_lots: int

    def __post_init__(self) -> None:
        if self.max_orders <= 0 or self.max_lots <= 0:
            raise ValueError("calibration budget must be positive")

    @classmethod
    def default(cls, L: int) -> "Budget":
        return cls(2 * L, 100_000)


@dataclass
class CorrectiveSequence:
    orders: List[Order] = field(default_factory=list)
    lots: int = 0
    pre_norm: float = 0.0
    post_norm: float = 0.0
    residual: bool = False
    notes: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.orders)


class _ModelSide:
    __slots__ = ("sign", "levels", "truncated")

    def __init__(self, sign: int, levels: List[list], truncated: bool):
        self.sign = sign  # +1 asks, -1 bids
        self.levels = levels  # [price, [[oid, vol, owned], ...]] best first
        self.truncated = truncated

    def copy(self) -> "_ModelSide":
        return _ModelSide(self.sign, [[p, [list(o) for o in q]] for p, q in self.levels], self.truncated)

    def better(self, p: int, q: int) -> bool:
        return self.sign * p < self.sign * q

    def rows(self, n: int) -> List[Tuple[int, int]]:
        return [(p, sum(o[1] for o in q)) for p, q in self.levels[:n]]

    def volume(self, i: int) -> int:
        return sum(o[1] for o in self.levels[i][1])

    def crossing_volume(self, price: int) -> int:
        """Volume on this side an opposite limit at ``price`` would consume."""
        tot = 0
        for p, q in self.levels:
            if self.better(price, p):
                break
            tot += sum(o[1] for o in q)
        return tot

    def consume(self, limit: int, vol: int) -> int:
        while vol and self.levels:
            p, q = self.levels[0]
            if self.better(limit, p):
                break
            while vol and q:
                take = min(q[0][1], vol)
                q[0][1] -= take
                vol -= take
                if q[0][1] == 0:
                    q.pop(0)
            if not q:
                self.levels.pop(0)
        return vol

    def rest(self, price: int, oid: int, vol: int) -> None:
        for i, (p, q) in enumerate(self.levels):
            if p == price:
                q.append([oid, vol, True])
                return
            if self.better(price, p):
                self.levels.insert(i, [price, [[oid, vol, True]]])
                return
        self.levels.append([price, [[oid, vol, True]]])

    def cancel(self, oid: int) -> int:
        for i, (p, q) in enumerate(self.levels):
            for k, o in enumerate(q):
                if o[0] == oid:
                    q.pop(k)
                    if not q:
                        self.levels.pop(i)
                    return o[1]
        return 0


class BookModel:
    """Top-of-book copy with per-order queues; supports limit and cancel."""

    def __init__(self, bids: _ModelSide, asks: _ModelSide):
        self.bids = bids
        self.asks = asks

    @classmethod
    def from_book(cls, book: OrderBook, depth: int) -> "BookModel":
        sides = []
        for side, sign in ((book.bids, -1), (book.asks, 1)):
            lv = side.top(depth + 1)
            levels = [[x.price, [[o.id, o.volume, o.origin.kind is OriginKind.CALIBRATION]
                                 for o in x.live_orders()]] for x in lv[:depth]]
            sides.append(_ModelSide(sign, levels, len(lv) > depth))
        return cls(*sides)

    @classmethod
    def from_levels(cls, bids: Sequence[Tuple[int, int]], asks: Sequence[Tuple[int, int]]) -> "BookModel":
        """Each level as one foreign order; handy for tests."""
        oid = -1
        out = []
        for rows, sign in ((bids, -1), (asks, 1)):
            levels = []
            for p, v in rows:
                levels.append([p, [[oid, v, False]]])
                oid -= 1
            out.append(_ModelSide(sign, levels, False))
        return cls(*out)

    def copy(self) -> "BookModel":
        return BookModel(self.bids.copy(), self.asks.copy())

    def side(self, s: int) -> _ModelSide:
        return self.bids if s == BID else self.asks

    def snapshot(self, l: int) -> LobSnapshot:
        return LobSnapshot.from_sides(self.bids.rows(l), self.asks.rows(l), l)

    def apply(self, order: Order) -> None:
        if order.order_type is OrderType.CANCEL:
            if not self.bids.cancel(order.ref_id):
                self.asks.cancel(order.ref_id)
            return
        if order.order_type is not OrderType.LIMIT:
            raise ValueError("model only plans limit and cancel orders")
        own, opp = (self.bids, self.asks) if order.side is Side.BUY else (self.asks, self.bids)
        left = opp.consume(order.price, order.volume)
        if left:
            own.rest(order.price, order.id, left)


# ---------------------------------------------------------------------------
# planning

Op = Tuple[str, int, int, int]  # ("limit", side_code, price, volume) or ("cancel", ref_id, 0, 0)


def _target_rows(target: LobSnapshot, s: int, L: int) -> List[Tuple[int, int]]:
    c = 0 if s == BID else 2
    return [(r[c], r[c + 1]) for r in target.levels[:L] if r[c] > 0]


def _remove_volume(m: BookModel, s: int, j: int, amount: int, tgt: List[Tuple[int, int]]) -> List[Op]:
    """Take ``amount`` lots off level ``j`` of side ``s``; levels above ``j`` end at target depth."""
    side = m.side(s)
    price, queue = side.levels[j]
    ops: List[Op] = []
    left = amount
    for oid, vol, owned in reversed(queue):
        if owned and vol <= left:
            ops.append(("cancel", oid, 0, 0))
            left -= vol
    if left == 0:
        return ops
    better = sum(side.volume(k) for k in range(j))
    opp = BID if s == ASK else ASK
    ops.append(("limit", opp, price, better + left))
    for k in range(j):
        ops.append(("limit", s, tgt[k][0], tgt[k][1]))
    return ops


def _plan(m: BookModel, target: LobSnapshot, L: int, s: int, i: int, kind: int) -> Optional[List[Op]]:
    side = m.side(s)
    rows = side.rows(L)
    tgt = _target_rows(target, s, L)
    n = max(len(rows), len(tgt))
    j = None
    for k in range(min(i + 1, n)):
        sp = rows[k][0] if k < len(rows) else 0
        tp = tgt[k][0] if k < len(tgt) else 0
        if sp != tp:
            j = k
            break
    if j is None:
        if i >= len(tgt):
            return None
        d = tgt[i][1] - rows[i][1]
        if d > 0:
            return [("limit", s, tgt[i][0], d)]
        if d < 0:
            return _remove_volume(m, s, i, -d, tgt)
        return None
    sp = rows[j][0] if j < len(rows) else None
    tp = tgt[j][0] if j < len(tgt) else None
    wanted = {p for p, _ in tgt}
    if sp is not None and (tp is None or side.better(sp, tp) or sp not in wanted):
        return _remove_volume(m, s, j, rows[j][1], tgt)
    # the target level is missing: one limit that also sweeps crossing opposite depth
    opp = m.side(ASK if s == BID else BID)
    return [("limit", s, tp, opp.crossing_volume(tp) + tgt[j][1])]


def greedy_synthesize(
    model: BookModel,
    target: LobSnapshot,
    L: int,
    budget: Budget,
    next_id: Callable[[], int],
    asset: int = 0,
    time: int = 0,
    band: Optional[Tuple[int, int]] = None,
    w_p: float = 1.0,
) -> CorrectiveSequence:
    """Plan corrective orders on ``model`` (mutated to the planned end state).

    Fixes are atomic against the budget; an entry whose fix would overrun it or
    leave the price band is skipped and reported as residual. The returned
    sequence is the prefix with the smallest gap norm, so it never leaves the
    book further from the target than it started.
    """
    l = target.depth
    if target.violations():
        raise ValueError("target snapshot violates book ordering")
    gap = compute_gap(model.snapshot(l), target, L)
    seq = CorrectiveSequence(pre_norm=gap.norm(w_p))
    best_norm, best_len, best_model = seq.pre_norm, 0, model.copy()
    planned: List[Order] = []
    lots = 0
    skip = set()
    for _ in range(8 * L + 16):
        if gap.is_zero():
            break
        applied = False
        for _, s, i, kind in gap.entries(w_p):
            if (s, i, kind) in skip:
                continue
            ops = _plan(model, target, L, s, i, kind)
            if not ops:
                skip.add((s, i, kind))
                continue
            cost_lots = sum(v for op, _, _, v in ops if op == "limit")
            if band is not None and any(op == "limit" and not band[0] <= p <= band[1] for op, _, p, _ in ops):
                seq.notes.append(f"band: side {s} level {i + 1}")
                skip.add((s, i, kind))
                continue
            if len(planned) + len(ops) > budget.max_orders or lots + cost_lots > budget.max_lots:
                seq.notes.append(f"budget: side {s} level {i + 1}")
                skip.add((s, i, kind))
                continue
            for op, a, p, v in ops:
                if op == "cancel":
                    o = Order(next_id(), asset, Side.BUY, OrderType.CANCEL, recv_time=time,
                              origin=ORIGIN_CALIBRATION, ref_id=a)
                else:
                    o = Order(next_id(), asset, Side.BUY if a == BID else Side.SELL, OrderType.LIMIT,
                              p, v, recv_time=time, origin=ORIGIN_CALIBRATION)
                model.apply(o)
                planned.append(o)
            lots += cost_lots
            applied = True
            break
        if not applied:
            break
        gap = compute_gap(model.snapshot(l), target, L)
        norm = gap.norm(w_p)
        if norm < best_norm:
            best_norm, best_len, best_model = norm, len(planned), model.copy()
    seq.orders = planned[:best_len]
    seq.lots = sum(o.volume for o in seq.orders if o.order_type is OrderType.LIMIT)
    seq.post_norm = best_norm
    seq.residual = best_norm > 0
    model.bids, model.asks = best_model.bids, best_model.asks
    return seq
