"""Multi-asset exchange facade: gating, limits, accounting and commits.

Two execution regimes share one order registry and ledger:

* ``synchronous`` matches every accepted order at arrival and reports one
  receipt per order;
* ``batched`` hands accepted orders to per-asset inboxes that the matching
  workers drain at synchronization points, committing results in
  ``(asset, arrival)`` order and reporting one receipt bundle per originator.

Both see identical books for an open-loop order flow; they differ in when
results become visible to agents.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..book import (LobSnapshot, Order, OrderType, Origin, OriginKind, Receipt, Side, Status,
                    TradeRecord)
from ..calibration.synthesize import Budget
from .calendar import Phase, SessionCalendar
from .rules import Ledger, PriceBand, SettlementRow
from .workers import CalibrationOutcome

OUTSIDE_SESSION = "OutsideSession"
PRICE_BAND = "PriceBand"
INSUFFICIENT_AVAILABLE = "InsufficientAvailable"
INSUFFICIENT_CASH = "InsufficientCash"
AUCTION_LIMIT_ONLY = "AuctionLimitOnly"
INVALID = "InvalidOrder"
UNKNOWN_ORDER = "UnknownOrder"


@dataclass
class AssetSpec:
    asset: int
    p_ref: int
    eta: float = 0.10
    tick_size: float = 0.01
    lot_size: int = 100


@dataclass(slots=True)
class OpenOrder:
    owner: str
    agent_id: int
    asset: int
    side: Side
    reserve_price: int
    remaining: int
    origin: Origin


def account_name(origin: Origin) -> str:
    if origin.kind is OriginKind.AGENT:
        return f"agent:{origin.agent_id}"
    return origin.kind.value


@dataclass
class CommitResult:
    trades: List[TradeRecord] = field(default_factory=list)
    # agent_id -> receipts, in commit order
    receipts: Dict[int, List[Receipt]] = field(default_factory=dict)
    touched: set = field(default_factory=set)


class Exchange:
    def __init__(
        self,
        assets: Sequence[AssetSpec],
        calendar: SessionCalendar,
        pool,
        batched: bool = False,
        expire_day_orders: bool = True,
        replay_bypass: bool = True,
    ):
        self.assets = {a.asset: a for a in assets}
        self.asset_ids = sorted(self.assets)
        self.calendar = calendar
        self.pool = pool
        self.batched = batched
        self.expire_day_orders = expire_day_orders
        self.replay_bypass = replay_bypass
        self.ledger = Ledger({a.asset: a.lot_size for a in assets})
        self.bands: Dict[int, PriceBand] = {a.asset: PriceBand.from_ref(a.p_ref, a.eta) for a in assets}
        self.band_history: List[Tuple[int, int, PriceBand]] = [(0, a, b) for a, b in self.bands.items()]
        self.registry: Dict[int, OpenOrder] = {}
        self.inbox: Dict[int, List[Order]] = {a: [] for a in self.asset_ids}
        self.preopen: Dict[int, List[Order]] = {a: [] for a in self.asset_ids}
        self.day_last: Dict[int, int] = {}
        self.settlements: List[Tuple[int, List[SettlementRow]]] = []
        self.accepted = 0
        self.rejected = 0
        self.on_trade: Optional[Callable[[TradeRecord], None]] = None

    # -- admission ----------------------------------------------------------
    def _reject(self, order: Order, reason: str, now: int) -> Receipt:
        self.rejected += 1
        return Receipt(order.id, Status.REJECTED, reason=reason, time=now)

    def route_order(self, order: Order, now: int) -> Tuple[Optional[Receipt], Optional[CommitResult]]:
        """Admit one order at ``now``.

        Returns ``(receipt, result)``: a receipt for the originator when the
        outcome is known at admission (rejection, queueing, synchronous match)
        and, in the synchronous regime, the committed match result.
        """
        phase = self.calendar.phase_at(now)
        if order.asset not in self.assets:
            return self._reject(order, INVALID, now), None
        if order.order_type is OrderType.CANCEL:
            if order.ref_id < 0:
                return self._reject(order, INVALID, now), None
            # only live orders of the same originator can be canceled
            e = self.registry.get(order.ref_id)
            if e is None or e.owner != account_name(order.origin) or e.asset != order.asset:
                return self._reject(order, UNKNOWN_ORDER, now), None
            if phase is Phase.PREOPEN_AUCTION:
                q = self.preopen[order.asset]
                for k, o in enumerate(q):
                    if o.id == order.ref_id:
                        q.pop(k)
                        self.accepted += 1
                        vol = self._release(o.id, o.volume)
                        return Receipt(order.id, Status.CANCELED, canceled=vol, time=now), None
            elif phase is not Phase.CONTINUOUS:
                return self._reject(order, OUTSIDE_SESSION, now), None
            self.accepted += 1
            return self._forward(order, now)
        err = order.validate()
        if err:
            return self._reject(order, INVALID, now), None
        if phase is not Phase.CONTINUOUS and phase is not Phase.PREOPEN_AUCTION:
            return self._reject(order, OUTSIDE_SESSION, now), None
        if phase is Phase.PREOPEN_AUCTION and order.order_type is not OrderType.LIMIT:
            return self._reject(order, AUCTION_LIMIT_ONLY, now), None
        band = self.bands[order.asset]
        bypass = self.replay_bypass and order.origin.kind is OriginKind.REPLAY
        if order.order_type is OrderType.LIMIT and not bypass and not band.contains(order.price):
            return self._reject(order, PRICE_BAND, now), None
        owner = account_name(order.origin)
        if order.side is Side.BUY:
            reserve = order.price if order.order_type is OrderType.LIMIT else band.p_max
            if not self.ledger.reserve_buy(owner, order.asset, reserve, order.volume):
                return self._reject(order, INSUFFICIENT_CASH, now), None
        else:
            reserve = 0
            if not self.ledger.reserve_sell(owner, order.asset, order.volume):
                return self._reject(order, INSUFFICIENT_AVAILABLE, now), None
        self.registry[order.id] = OpenOrder(owner, order.origin.agent_id, order.asset, order.side,
                                            reserve, order.volume, order.origin)
        self.accepted += 1
        order.recv_time = now
        if phase is Phase.PREOPEN_AUCTION:
            self.preopen[order.asset].append(order)
            return Receipt(order.id, Status.QUEUED, resting=order.volume, time=now), None
        return self._forward(order, now)

    def _forward(self, order: Order, now: int):
        order.recv_time = now
        if self.batched:
            self.inbox[order.asset].append(order)
            return None, None
        (trades, receipt), = self.pool.run([("apply", order.asset, (order,))])
        res = CommitResult()
        self._settle(order, trades, receipt, res, own_receipt=False)
        return receipt, res

    # -- accounting ---------------------------------------------------------
    def _release(self, oid: int, volume: int) -> int:
        e = self.registry.pop(oid, None)
        if e is None:
            return 0
        if e.side is Side.BUY:
            self.ledger.release_buy(e.owner, e.asset, e.reserve_price, volume)
        else:
            self.ledger.release_sell(e.owner, e.asset, volume)
        return volume

    def _fill(self, oid: int, price: int, volume: int) -> Optional[OpenOrder]:
        e = self.registry[oid]
        if e.side is Side.BUY:
            self.ledger.fill_buy(e.owner, e.asset, e.reserve_price, price, volume)
        else:
            self.ledger.fill_sell(e.owner, e.asset, price, volume)
        e.remaining -= volume
        if e.remaining == 0:
            del self.registry[oid]
        return e

    def _record_trade(self, t: TradeRecord, res: CommitResult) -> None:
        res.trades.append(t)
        self.day_last[t.asset] = t.price
        if self.on_trade is not None:
            self.on_trade(t)

    def _notify(self, res: CommitResult, agent_id: int, r: Receipt) -> None:
        if agent_id >= 0:
            res.receipts.setdefault(agent_id, []).append(r)

    def _settle(self, order: Order, trades, receipt: Receipt, res: CommitResult, own_receipt: bool = True) -> None:
        res.touched.add(order.asset)
        for t in trades:
            self._fill(t.aggressor_id, t.price, t.volume)
            maker = self._fill(t.resting_id, t.price, t.volume)
            self._record_trade(t, res)
            if maker is not None:
                st = Status.FILLED if t.resting_id not in self.registry else Status.PARTIAL
                self._notify(res, maker.agent_id, Receipt(t.resting_id, st, filled=t.volume, time=t.time))
        if order.order_type is OrderType.CANCEL:
            if receipt.status is Status.CANCELED:
                self._release(order.ref_id, receipt.canceled)
        elif order.order_type is OrderType.MARKET and receipt.discarded:
            self._release(order.id, receipt.discarded)
        if own_receipt:
            self._notify(res, order.origin.agent_id if order.origin.kind is OriginKind.AGENT else -1, receipt)

    # -- synchronization ----------------------------------------------------
    def commit(self) -> CommitResult:
        """Drain every inbox through the workers and commit in (asset, arrival) order."""
        res = CommitResult()
        batch = [(a, q) for a, q in self.inbox.items() if q]
        if not batch:
            return res
        for a, _ in batch:
            self.inbox[a] = []
        out = self.pool.run([("apply_batch", a, (q,)) for a, q in batch])
        for (a, q), results in zip(batch, out):
            for o, (trades, receipt) in zip(q, results):
                self._settle(o, trades, receipt, res)
        return res

    def pending(self) -> int:
        return sum(len(q) for q in self.inbox.values())

    def run_auctions(self, now: int) -> CommitResult:
        res = CommitResult()
        calls = [("auction", a, (self.preopen[a], self.bands[a].p_ref, now)) for a in self.asset_ids]
        for a in self.asset_ids:
            self.preopen[a] = []
        results = self.pool.run(calls)
        self.auction_results = results
        for a, ar in zip(self.asset_ids, results):
            res.touched.add(a)
            for t in ar.executions:
                for oid in (t.aggressor_id, t.resting_id):
                    e = self._fill(oid, t.price, t.volume)
                    st = Status.FILLED if oid not in self.registry else Status.PARTIAL
                    self._notify(res, e.agent_id, Receipt(oid, st, filled=t.volume, time=now))
                self._record_trade(t, res)
        return res

    def end_of_day(self, day: int, now: int) -> CommitResult:
        res = CommitResult()
        if self.expire_day_orders:
            for a, gone in zip(self.asset_ids, self.pool.run([("expire", a, ()) for a in self.asset_ids])):
                res.touched.add(a)
                for oid, vol in gone:
                    e = self.registry.get(oid)
                    self._release(oid, vol)
                    if e is not None:
                        self._notify(res, e.agent_id, Receipt(oid, Status.EXPIRED, canceled=vol, time=now))
        for a in self.asset_ids:
            for o in self.preopen[a]:
                self._release(o.id, o.volume)
            self.preopen[a] = []
        self.settlements.append((day, self.ledger.settle()))
        for a in self.asset_ids:
            close = self.day_last.get(a, self.bands[a].p_ref)
            self.bands[a] = PriceBand.from_ref(close, self.assets[a].eta)
            self.band_history.append((day + 1, a, self.bands[a]))
        self.day_last = {}
        return res

    # -- observation and calibration ----------------------------------------
    def snapshots(self, assets: Sequence[int], l: int, now: int) -> List[LobSnapshot]:
        return self.pool.run([("snapshot", a, (l, now)) for a in assets])

    def calibrate(self, targets: Dict[int, LobSnapshot], L: int, budget: Budget, id_base: Callable[[int], int],
                  now: int, w_p: float, l: int) -> Tuple[List[CalibrationOutcome], CommitResult]:
        """Run the per-asset greedy step on the owning workers and commit results.

        ``id_base(n)`` reserves ``n`` consecutive order ids and returns the first.
        """
        calls = []
        span = 8 * L + 16 + 4 * budget.max_orders
        for a in sorted(targets):
            band = self.bands[a]
            calls.append(("calibrate", a, (targets[a], L, budget, id_base(span), now,
                                           (band.p_min, band.p_max), w_p, l)))
        outs = self.pool.run(calls)
        res = CommitResult()
        for out in outs:
            for o, (trades, receipt) in zip(out.sequence.orders, out.results):
                if o.order_type is not OrderType.CANCEL:
                    self.registry[o.id] = OpenOrder("calibration", -1, o.asset, o.side, o.price, o.volume, o.origin)
                self._settle(o, trades, receipt, res)
        return outs, res
