"""Random order-stream generators shared by unit and acceptance tests."""
from __future__ import annotations

import random

from evosim.book import Order, OrderBook, OrderType, Side

from oracles import NaiveBook


def random_stream(seed: int, n: int, mid: int = 1000, spread: int = 12):
    """Mixed limit/market/cancel stream; cancels hit random earlier ids (some stale)."""
    rng = random.Random(seed)
    ops = []
    ids = []
    for oid in range(1, n + 1):
        u = rng.random()
        side = 1 if rng.random() < 0.5 else -1
        if u < 0.5 or not ids:
            # mostly passive, sometimes crossing by a few ticks
            off = rng.randint(-3, spread)
            price = mid - side * off
            ops.append(("L", oid, side, max(price, 1), rng.randint(1, 20)))
            ids.append(oid)
        elif u < 0.62:
            ops.append(("M", oid, side, rng.randint(1, 30)))
        else:
            ops.append(("C", oid, ids[rng.randrange(max(0, len(ids) - 60), len(ids))]))
    return ops


def run_fast(ops, l=10, snap_every=50):
    book = OrderBook()
    tape, receipts, snaps = [], [], []
    for i, op in enumerate(ops):
        if op[0] == "L":
            _, oid, side, price, vol = op
            trades, r = book.match_limit(Order(oid, 0, Side(side), OrderType.LIMIT, price, vol))
            receipts.append(("limit", oid, r.filled, r.resting))
        elif op[0] == "M":
            _, oid, side, vol = op
            trades, r = book.match_market(Order(oid, 0, Side(side), OrderType.MARKET, 0, vol))
            receipts.append(("market", oid, r.filled, r.discarded))
        else:
            r = book.cancel(op[2])
            trades = []
            receipts.append(("cancel", op[2], r.canceled))
        tape.extend((t.price, t.volume, t.aggressor_id, t.resting_id) for t in trades)
        if i % snap_every == snap_every - 1:
            snaps.append(book.snapshot(l).levels)
    snaps.append(book.snapshot(l).levels)
    return tape, receipts, snaps, book


def run_naive(ops, l=10, snap_every=50):
    book = NaiveBook()
    tape, receipts, snaps = [], [], []
    for i, op in enumerate(ops):
        if op[0] == "L":
            _, oid, side, price, vol = op
            trades, r = book.limit(oid, side, price, vol)
        elif op[0] == "M":
            _, oid, side, vol = op
            trades, r = book.market(oid, side, vol)
        else:
            trades, r = [], book.cancel(op[2])
        tape.extend(trades)
        receipts.append(r)
        if i % snap_every == snap_every - 1:
            snaps.append(book.snapshot(l))
    snaps.append(book.snapshot(l))
    return tape, receipts, snaps, book
