"""Per-asset matching engines and the pools that host them.

A :class:`BookEngine` owns the books of a set of assets and is the only writer
of those books. Pools route calls ``(method, asset, args)`` to the engine that
owns ``asset`` and return results in call order: the serial pool runs one
engine in-process, the process pool keeps one persistent engine per worker
process and fans a batch out to all of them before collecting.
"""
from __future__ import annotations

import multiprocessing as mp
import os
import traceback
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from ..book import LobSnapshot, Order, OrderBook, Receipt, TradeRecord
from ..calibration.synthesize import BookModel, Budget, CorrectiveSequence, greedy_synthesize
from .auction import AuctionResult, run_call_auction

Call = Tuple[str, int, tuple]


class WorkerFailure(RuntimeError):
    pass


@dataclass
class CalibrationOutcome:
    asset: int
    sequence: CorrectiveSequence
    results: List[Tuple[List[TradeRecord], Receipt]] = field(default_factory=list)
    post: Optional[LobSnapshot] = None


class BookEngine:
    def __init__(self, assets: Iterable[int]):
        self.books: Dict[int, OrderBook] = {a: OrderBook(a) for a in assets}

    def call(self, method: str, asset: int, args: tuple) -> Any:
        return getattr(self, method)(self.books[asset], *args)

    # each method takes the asset's book first
    def apply(self, book: OrderBook, order: Order):
        return book.apply(order)

    def apply_batch(self, book: OrderBook, orders: Sequence[Order]):
        ap = book.apply
        return [ap(o) for o in orders]

    def auction(self, book: OrderBook, preopen: Sequence[Order], p_ref: int, time: int) -> AuctionResult:
        return run_call_auction(book, preopen, p_ref, time)

    def expire(self, book: OrderBook) -> List[Tuple[int, int]]:
        return sorted((o.id, o.volume) for o in book.expire_all())

    def snapshot(self, book: OrderBook, l: int, time: int) -> LobSnapshot:
        return book.snapshot(l, time)

    def last_price(self, book: OrderBook) -> int:
        return book.last_price

    def calibrate(self, book: OrderBook, target: LobSnapshot, L: int, budget: Budget, id_base: int,
                  time: int, band: Optional[Tuple[int, int]], w_p: float, l: int) -> CalibrationOutcome:
        """Plan against the book's top region, then submit through the matcher."""
        ids = iter(range(id_base, id_base + 8 * L + 16 + 4 * budget.max_orders))
        model = BookModel.from_book(book, 3 * L + budget.max_orders + 2)
        seq = greedy_synthesize(model, target, L, budget, lambda: next(ids), book.asset, time, band, w_p)
        out = CalibrationOutcome(book.asset, seq)
        for o in seq.orders:
            out.results.append(book.apply(replace(o)))
        out.post = book.snapshot(l, time)
        return out


class SerialPool:
    backend = "serial"

    def __init__(self, assets: Sequence[int], workers: int = 1):
        self.workers = max(workers, 1)
        self.engine = BookEngine(assets)

    def run(self, calls: Sequence[Call]) -> List[Any]:
        call = self.engine.call
        return [call(m, a, args) for m, a, args in calls]

    def close(self) -> None:
        pass


def _worker_main(conn, assets) -> None:
    engine = BookEngine(assets)
    while True:
        msg = conn.recv()
        if msg is None:
            break
        try:
            conn.send(("ok", [engine.call(m, a, args) for m, a, args in msg]))
        except Exception:
            conn.send(("err", traceback.format_exc()))


class ProcessPool:
    """Persistent worker processes; asset ``a`` lives on worker ``a % n``."""

    backend = "process"

    def __init__(self, assets: Sequence[int], workers: int):
        self.workers = max(1, min(workers, len(assets)))
        ctx = mp.get_context("spawn" if os.name == "nt" else "fork")
        self.owner = {a: i % self.workers for i, a in enumerate(sorted(assets))}
        self.conns = []
        self.procs = []
        for w in range(self.workers):
            mine = [a for a in assets if self.owner[a] == w]
            parent, child = ctx.Pipe()
            p = ctx.Process(target=_worker_main, args=(child, mine), daemon=True)
            p.start()
            child.close()
            self.conns.append(parent)
            self.procs.append(p)

    def run(self, calls: Sequence[Call]) -> List[Any]:
        groups: List[List[int]] = [[] for _ in range(self.workers)]
        for i, (_, a, _) in enumerate(calls):
            groups[self.owner[a]].append(i)
        for w, idx in enumerate(groups):
            if idx:
                self.conns[w].send([calls[i] for i in idx])
        out: List[Any] = [None] * len(calls)
        for w, idx in enumerate(groups):
            if not idx:
                continue
            try:
                status, payload = self.conns[w].recv()
            except EOFError as e:
                raise WorkerFailure(f"matching worker {w} died") from e
            if status != "ok":
                raise WorkerFailure(f"matching worker {w} failed:\n{payload}")
            for i, r in zip(idx, payload):
                out[i] = r
        return out

    def close(self) -> None:
        for c in self.conns:
            try:
                c.send(None)
            except (BrokenPipeError, OSError):
                pass
        for p in self.procs:
            p.join(timeout=5)
            if p.is_alive():
                p.terminate()
        self.conns, self.procs = [], []


def make_pool(assets: Sequence[int], workers: int, backend: str = "auto"):
    if backend == "auto":
        backend = "process" if workers > 1 and (os.cpu_count() or 1) >= 2 else "serial"
    if backend == "process":
        return ProcessPool(assets, workers)
    if backend == "serial":
        return SerialPool(assets, workers)
    raise ValueError(f"unknown worker backend {backend!r}")
