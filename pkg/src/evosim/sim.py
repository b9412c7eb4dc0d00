"""Simulation driver: wires kernel, exchange, agents, oracle and recorders."""
from __future__ import annotations

import logging
import os
import time as wall
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import yaml

from . import io
from .agents.base import Agent, AgentDecision, MarketView
from .agents.factor import FactorState
from .agents.population import PopulationEntry, spawn_population
from .book import (ORIGIN_INTERVENTION, ORIGIN_REPLAY, LobSnapshot, Order, OrderType, OriginKind, Receipt,
                   Side, Status)
from .calibration.gap import compute_gap
from .calibration.oracle import NoiseParams, OracleSource, reference_from_log
from .calibration.synthesize import Budget
from .config import RunConfig, event_time
from .exchange.calendar import NS_PER_DAY, Phase, SessionCalendar
from .exchange.exchange import CommitResult, Exchange
from .exchange.workers import make_pool
from .kernel import NS_PER_S, EventKind, Kernel, LatencyModel

log = logging.getLogger(__name__)


@dataclass
class CalibrationRow:
    time: int
    asset: int
    pre_norm: float
    post_norm: float
    orders: int
    lots: int
    residual: bool

    def line(self) -> str:
        return (f"{self.time},{self.asset},{self.pre_norm:g},{self.post_norm:g},{self.orders},{self.lots},"
                f"{int(self.residual)}\n")


@dataclass
class RunResult:
    snapshots: List[LobSnapshot] = field(default_factory=list)
    trades: list = field(default_factory=list)
    trace: List[tuple] = field(default_factory=list)
    coverage: List[tuple] = field(default_factory=list)
    calibration: List[CalibrationRow] = field(default_factory=list)
    settlements: list = field(default_factory=list)
    counters: Dict[str, int] = field(default_factory=dict)
    processed_orders: int = 0
    rejected_orders: int = 0
    wall_clock_s: float = 0.0
    calibration_wall_s: float = 0.0
    log_bytes: Dict[str, int] = field(default_factory=dict)
    day_open_avail: Dict[int, Dict[str, Dict[int, int]]] = field(default_factory=dict)
    bands: list = field(default_factory=list)
    dispatch_digest: str = ""
    out_dir: Optional[str] = None
    seeded_opening: bool = False

    @property
    def log_size_bytes(self) -> int:
        return self.log_bytes.get("snapshots", 0) + self.log_bytes.get("main", 0)

    def snapshot_series(self, asset: int) -> List[LobSnapshot]:
        return [s for s in self.snapshots if s.asset == asset]


def build_calendar(cfg: RunConfig) -> SessionCalendar:
    days, template = cfg.days, cfg.session_template()
    if cfg.calendar:
        with open(cfg.calendar) as f:
            spec = yaml.safe_load(f) or {}
        days = spec.get("days", days)
        if spec.get("sessions"):
            template = [tuple(s) for s in spec["sessions"]]
    return SessionCalendar(list(days), template)


class Simulation:
    def __init__(
        self,
        cfg: RunConfig,
        agents: Optional[Sequence[Agent]] = None,
        reference: Optional[Dict[int, List[LobSnapshot]]] = None,
        replay: Optional[Sequence[Order]] = None,
        initial_books: Optional[Dict[Tuple[int, int], LobSnapshot]] = None,
    ):
        self.cfg = cfg
        self.calendar = build_calendar(cfg)
        horizon = self.calendar.end_time
        if cfg.stop_at:
            horizon = min(horizon, self.calendar.at_clock(len(self.calendar.days) - 1, cfg.stop_at))
        self.horizon = horizon
        self.kernel = Kernel(cfg.slice_width_ns, LatencyModel(cfg.default_latency_ns), horizon,
                             self._on_slice_end)
        self.asset_ids = sorted(a.asset for a in cfg.assets)
        self.pool = make_pool(self.asset_ids, max(cfg.workers, 1), cfg.backend if cfg.workers else "serial")
        self.batched = cfg.workers > 0
        self.exchange = Exchange(cfg.assets, self.calendar, self.pool, batched=self.batched,
                                 expire_day_orders=cfg.expire_day_orders, replay_bypass=cfg.replay_bypass)
        self.result = RunResult()
        self.replay = list(replay) if replay is not None else None
        if self.replay is None and cfg.replay:
            self.replay = io.read_order_trace(cfg.replay)
        self.initial_books = initial_books
        if self.initial_books is None and cfg.initial_snapshot:
            self.initial_books = {(s.timestamp // NS_PER_DAY, s.asset): s
                                  for s in io.read_snapshot_log(cfg.initial_snapshot)}
        start_id = 1
        if self.replay:
            start_id = max(o.id for o in self.replay) + 1
        self._next_id = start_id
        first = self.calendar.sessions[0].start
        self.factor = FactorState(cfg.seed, self.asset_ids, t0=first, **cfg.factor)
        if agents is None:
            entries = [PopulationEntry.from_dict(e) for e in cfg.agents]
            if cfg.population:
                with open(cfg.population) as f:
                    entries += [PopulationEntry.from_dict(e) for e in yaml.safe_load(f) or []]
            agents = spawn_population(entries, cfg.seed, self.asset_ids)
        self.agents: Dict[int, Agent] = {a.agent_id: a for a in agents}
        for a in agents:
            self.exchange.ledger.open_account(f"agent:{a.agent_id}", a.cash, a.holdings)
        # calibration
        c = cfg.calibration
        self.oracle: Optional[OracleSource] = None
        if c.enabled:
            if reference is None:
                if not c.reference:
                    raise ValueError("calibration enabled without a reference")
                reference = reference_from_log(io.read_snapshot_log(c.reference))
            self.oracle = OracleSource(reference, NoiseParams(c.sigma0_sq, c.alpha), c.noise_seed, c.L, c.strict)
            self.budget = Budget(c.max_orders or 2 * c.L, c.max_lots)
            self.cal_start = event_time(c.start, len(self.calendar.days)) if c.start is not None else 0
        self.intervened: Dict[int, int] = {a: 0 for a in self.asset_ids}
        self._view_cache: Dict[int, LobSnapshot] = {}
        self._since: Dict[int, List[int]] = {a: [0, 0] for a in self.asset_ids}
        self._files: Dict[str, TextIO] = {}
        self._trace_on = cfg.record_orders
        self._digest = 0

    # -- ids and output -------------------------------------------------------
    def new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def reserve_ids(self, n: int) -> int:
        i = self._next_id
        self._next_id += n
        return i

    def _open_outputs(self) -> None:
        d = self.cfg.out_dir
        self.result.out_dir = d
        if not d:
            return
        os.makedirs(d, exist_ok=True)
        c = self.cfg
        plan = {"snapshots": (c.log_snapshots, io.snapshot_header(c.snapshot_levels)),
                "main": (c.main_log, io.MAIN_HEADER),
                "trades": (c.record_trades, io.TRADE_HEADER),
                "orders": (c.record_orders, io.TRACE_HEADER),
                "coverage": (c.record_coverage, io.COVERAGE_HEADER),
                "calibration": (c.calibration.enabled, io.CALIBRATION_HEADER),
                "settlement": (True, io.SETTLEMENT_HEADER)}
        for name, (on, header) in plan.items():
            if on:
                f = self._files[name] = open(os.path.join(d, f"{name}.csv"), "w")
                f.write(header)

    def _emit(self, name: str, line: str) -> None:
        self.result.log_bytes[name] = self.result.log_bytes.get(name, 0) + len(line)
        f = self._files.get(name)
        if f is not None:
            f.write(line)

    # -- scheduling -----------------------------------------------------------
    def _schedule_static(self) -> None:
        k = self.kernel
        for t, day, phase in self.calendar.transitions():
            if t <= self.horizon:
                k.schedule_at(t, EventKind.SESSION_TRANSITION, (day, phase))
        cadence = int(round(self.cfg.snapshot_cadence_s * NS_PER_S))
        for i, t in enumerate(self.calendar.checkpoints(cadence)):
            if t <= self.horizon:
                k.schedule_at(t, EventKind.RECORDING_CHECKPOINT, i)
        for iv in self.cfg.interventions:
            t = event_time(iv.event_time, len(self.calendar.days))
            if self.calendar.phase_at(t) is not Phase.CONTINUOUS:
                raise ValueError(f"intervention at {iv.event_time} is outside continuous trading")
            if iv.magnitude > 0:
                side = Side.BUY if iv.direction > 0 else Side.SELL
                o = Order(self.new_id(), iv.asset, side, OrderType.MARKET, 0, iv.magnitude, t, ORIGIN_INTERVENTION)
                k.schedule_at(t, EventKind.ORDER_ARRIVAL, o)
        if self.replay:
            for o in self.replay:
                kind = EventKind.CANCEL if o.order_type is OrderType.CANCEL else EventKind.ORDER_ARRIVAL
                k.schedule_at(o.recv_time, kind, o)
        start = self.calendar.sessions[0].start
        for aid in sorted(self.agents):
            t = self.agents[aid].first_wakeup(start)
            if t is not None and t <= self.horizon:
                k.schedule_wakeup(aid, t)

    # -- main loop ------------------------------------------------------------
    def run(self) -> RunResult:
        t0 = wall.perf_counter()
        self._open_outputs()
        try:
            self._schedule_static()
            k = self.kernel
            while True:
                ev = k.next_event()
                if not ev:
                    break
                self._dispatch(ev)
            if self.batched:
                self._handle(self.exchange.commit(), k.now)
        finally:
            for f in self._files.values():
                f.close()
            self.pool.close()
        r = self.result
        r.wall_clock_s = wall.perf_counter() - t0
        r.counters = self.kernel.counters()
        r.processed_orders = self.exchange.accepted
        r.rejected_orders = self.exchange.rejected
        r.settlements = self.exchange.settlements
        r.bands = self.exchange.band_history
        r.dispatch_digest = f"{self._digest:016x}"
        if r.out_dir:
            self._write_report()
        return r

    def _dispatch(self, ev) -> None:
        kind = ev.kind
        # rolling digest of the dispatch trace
        self._digest = (self._digest * 1_000_003 + ev.due_time * 31 + ev.seq * 7 + int(kind)) & (2 ** 64 - 1)
        if kind is EventKind.ORDER_ARRIVAL or kind is EventKind.CANCEL:
            self._on_order(ev.payload)
        elif kind is EventKind.AGENT_WAKEUP:
            self._on_wakeup(ev.payload)
        elif kind is EventKind.EXCHANGE_RESPONSE:
            aid, receipts = ev.payload
            self.agents[aid].on_receipts(receipts)
        elif kind is EventKind.RECORDING_CHECKPOINT:
            self._on_checkpoint()
        elif kind is EventKind.SESSION_TRANSITION:
            self._on_session(*ev.payload)

    def _on_slice_end(self, boundary: int) -> None:
        if self.batched and not self.cfg.async_commit and self.exchange.pending():
            self._handle(self.exchange.commit(), boundary)

    def _hard_sync(self) -> None:
        if self.batched:
            self._handle(self.exchange.commit(), self.kernel.now)

    def _handle(self, res: Optional[CommitResult], t: int) -> None:
        if res is None:
            return
        for a in res.touched:
            self._view_cache.pop(a, None)
        if res.trades:
            rec = self.cfg.record_trades
            for tr in res.trades:
                s = self._since[tr.asset]
                s[0] += 1
                s[1] += tr.volume
                if rec:
                    self.result.trades.append(tr)
                    self._emit("trades", io.trade_line(tr))
        for aid, receipts in res.receipts.items():
            self._send_receipts(aid, receipts, t)

    def _send_receipts(self, aid: int, receipts: List[Receipt], t: int) -> None:
        agent = self.agents.get(aid)
        if agent is None:
            return
        self.kernel.send((aid, receipts), EventKind.EXCHANGE_RESPONSE, max(t, self.kernel.now),
                         sender="exchange", receiver=agent.agent_type)

    # -- handlers -------------------------------------------------------------
    def _on_order(self, order: Order) -> None:
        now = self.kernel.now
        row = io.trace_row(order, now) if self._trace_on else None
        is_agent_limit = order.origin.kind is OriginKind.AGENT and order.order_type is OrderType.LIMIT
        cov = None
        if self.cfg.record_coverage and is_agent_limit:
            cov = (now, order.origin.agent_type, "B" if order.side is Side.BUY else "S", order.price,
                   self._view(order.asset).mid(), order.volume)
        volume = order.volume
        receipt, res = self.exchange.route_order(order, now)
        if receipt is not None and receipt.status is Status.REJECTED:
            if order.origin.kind is OriginKind.AGENT:
                self._send_receipts(order.origin.agent_id, [receipt], now)
            return
        if order.origin.kind is OriginKind.INTERVENTION:
            self.intervened[order.asset] += volume
        if row is not None:
            self.result.trace.append(row)
            self._emit("orders", io.trace_line(row))
        if cov is not None:
            self.result.coverage.append(cov)
            self._emit("coverage", ",".join(map(str, cov)) + "\n")
        if res is not None:
            self._handle(res, now)
        if receipt is not None and order.origin.kind is OriginKind.AGENT:
            self._send_receipts(order.origin.agent_id, [receipt], now)

    def _view(self, asset: int) -> LobSnapshot:
        s = self._view_cache.get(asset)
        if s is None:
            s = self._view_cache[asset] = self.exchange.snapshots([asset], self.cfg.view_levels,
                                                                  self.kernel.now)[0]
        return s

    def _on_wakeup(self, aid: int) -> None:
        agent = self.agents[aid]
        now = self.kernel.now
        view = MarketView(now, self.calendar, self._view, lambda a: self.exchange.bands[a].p_ref,
                          self.exchange.ledger.accounts[f"agent:{aid}"], agent.origin, self.new_id, self.factor)
        decision: AgentDecision = agent.on_wakeup(view)
        bad = next((o for o in decision.batch if o.validate() or o.recv_time < now), None)
        if bad is not None:
            why = bad.validate() or "send time in the past"
            log.warning("agent %d decision rejected: %s", aid, why)
            self._send_receipts(aid, [Receipt(o.id, Status.REJECTED, reason=f"InvalidDecision: {why}", time=now)
                                      for o in decision.batch], now)
        else:
            k = self.kernel
            for o in decision.batch:
                kind = EventKind.CANCEL if o.order_type is OrderType.CANCEL else EventKind.ORDER_ARRIVAL
                k.send(o, kind, o.recv_time, sender=agent.agent_type, receiver="exchange")
        if decision.next_wakeup is not None and decision.next_wakeup <= self.horizon:
            self.kernel.schedule_wakeup(aid, max(decision.next_wakeup, now))

    def _on_session(self, day: int, phase: Phase) -> None:
        now = self.kernel.now
        self._hard_sync()
        if phase is Phase.PREOPEN_AUCTION or (phase is Phase.CONTINUOUS and
                                              self.calendar.day_sessions(day)[0].start == now):
            self.result.day_open_avail[day] = {
                name: dict(acct.h_avail) for name, acct in self.exchange.ledger.accounts.items()}
        if phase is Phase.CONTINUOUS and self.calendar.opening_auction_time(day) == now:
            self._handle(self.exchange.run_auctions(now), now)
        if phase is Phase.CONTINUOUS and self.initial_books and self._is_first_continuous(day, now):
            self._seed_opening(day, now)
        if phase is Phase.EOD_CLEARING:
            self._handle(self.exchange.end_of_day(day, now), now)
            for row in self.exchange.settlements[-1][1]:
                self._emit("settlement", f"{day},{row.agent},{row.asset},{row.bought},{row.sold},"
                                         f"{row.pend_released},{row.cash_delta}\n")

    def _is_first_continuous(self, day: int, now: int) -> bool:
        for s in self.calendar.day_sessions(day):
            if s.phase is Phase.CONTINUOUS:
                return s.start == now
        return False

    def _seed_opening(self, day: int, now: int) -> None:
        for a in self.asset_ids:
            snap = self.initial_books.get((day, a))
            if snap is None:
                continue
            self.result.seeded_opening = True
            log.warning("seeding day %d asset %d opening book from an initial snapshot", day, a)
            for side, c in ((Side.BUY, 0), (Side.SELL, 2)):
                for row in snap.levels:
                    if row[c] > 0 and row[c + 1] > 0:
                        o = Order(self.new_id(), a, side, OrderType.LIMIT, row[c], row[c + 1], now, ORIGIN_REPLAY)
                        self._on_order(o)
        self._hard_sync()

    def _on_checkpoint(self) -> None:
        k = self.kernel
        now = k.now
        while k.peek_time() == now:
            ev = k.next_event()
            if not ev:
                break
            self._dispatch(ev)
        self._hard_sync()
        l = self.cfg.snapshot_levels
        if self.oracle is not None and now >= self.cal_start:
            c = self.cfg.calibration
            targets = {a: self.oracle.query(a, now, self.intervened[a]) for a in self.asset_ids}
            t0 = wall.perf_counter()
            outs, res = self.exchange.calibrate(targets, c.L, self.budget, self.reserve_ids, now, c.w_p, l)
            self.result.calibration_wall_s += wall.perf_counter() - t0
            self._handle(res, now)
            for out in outs:
                seq = out.sequence
                if self._trace_on:
                    for o in seq.orders:
                        row = io.trace_row(o, now)
                        self.result.trace.append(row)
                        self._emit("orders", io.trace_line(row))
                post = compute_gap(out.post, targets[out.asset], c.L).norm(c.w_p)
                cr = CalibrationRow(now, out.asset, seq.pre_norm, post, len(seq), seq.lots, post > 0)
                self.result.calibration.append(cr)
                self._emit("calibration", cr.line())
        self.intervened = {a: 0 for a in self.asset_ids}
        snaps = self.exchange.snapshots(self.asset_ids, l, now)
        phase = self.calendar.phase_at(now).value
        for s in snaps:
            self._view_cache.pop(s.asset, None)
            if self.cfg.log_snapshots:
                self.result.snapshots.append(s)
                self._emit("snapshots", io.snapshot_line(s))
            if self.cfg.main_log:
                n, v = self._since[s.asset]
                self._emit("main", f"{now},{s.asset},{phase},{s.best_bid},{s.best_ask},{n},{v},"
                                   f"{self.exchange.accepted},{self.exchange.rejected}\n")
            self._since[s.asset] = [0, 0]

    def _write_report(self) -> None:
        r = self.result
        lines = [
            f"processed_orders={r.processed_orders}",
            f"rejected_orders={r.rejected_orders}",
            f"log_size_bytes={r.log_size_bytes}",
            f"dispatch_digest={r.dispatch_digest}",
            f"seeded_opening={int(r.seeded_opening)}",
        ] + [f"{k}={v}" for k, v in r.counters.items()]
        with open(os.path.join(r.out_dir, "report.txt"), "w") as f:
            f.write("\n".join(lines) + "\n")
        with open(os.path.join(r.out_dir, "perf.txt"), "w") as f:
            f.write(f"wall_clock_s={r.wall_clock_s:.6f}\n")


def run(cfg: RunConfig, **kw) -> RunResult:
    return Simulation(cfg, **kw).run()
