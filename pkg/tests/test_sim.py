import dataclasses

import pytest

from evosim.agents.base import Agent, AgentDecision
from evosim.book import Side
from evosim.config import CalibrationConfig, InterventionSpec, RunConfig
from evosim.exchange.calendar import parse_clock
from evosim.exchange.exchange import AssetSpec
from evosim.harness.replay import ReplayStream, replay
from evosim.harness.stress import stress_config
from evosim.sim import Simulation, run


def mixed(n_assets=2, stop="09:45", **kw):
    agents = [
        {"type": "quote", "count": n_assets, "seed": 1,
         "params": {"assets": "round_robin", "levels": 3, "size": 10, "jitter": 1, "cash": 10 ** 10, "holdings": 10 ** 4}},
        {"type": "zi", "count": 10, "seed": 2, "params": {"rate": [0.2, 0.6], "cash": 10 ** 8, "holdings": [0, 100]}},
        {"type": "factor", "count": 2, "seed": 3, "params": {"cash": 10 ** 8, "holdings": 100}},
    ]
    base = dict(seed=11, assets=[AssetSpec(a, 1000 + 100 * a) for a in range(n_assets)], stop_at=stop, agents=agents)
    base.update(kw)
    return RunConfig(**base)


def test_repeated_runs_identical():
    a, b = run(mixed()), run(mixed())
    assert a.snapshots == b.snapshots and a.trades == b.trades and a.trace == b.trace
    assert a.dispatch_digest == b.dispatch_digest
    c = run(mixed(seed=12))
    assert c.snapshots != a.snapshots


def test_worker_counts_give_identical_logs():
    logs = [run(mixed(n_assets=6, workers=w)) for w in (1, 4, 16)]
    for r in logs[1:]:
        assert r.snapshots == logs[0].snapshots and r.trades == logs[0].trades


def test_process_pool_matches_serial():
    serial = run(mixed(n_assets=4, stop="09:35", workers=2, backend="serial"))
    proc = run(mixed(n_assets=4, stop="09:35", workers=2, backend="process"))
    assert proc.snapshots == serial.snapshots and proc.trades == serial.trades


def test_open_loop_batched_equals_synchronous():
    cfg = stress_config(200, 20, 1, cadence_s=1.0, record_trades=True)
    sync = run(cfg)
    for asyn in (False, True):
        batched = run(dataclasses.replace(cfg, workers=1, async_commit=asyn))
        assert batched.snapshots == sync.snapshots and batched.trades == sync.trades


def test_record_then_replay_fixpoint_two_days():
    cfg = mixed(days=["2024-01-02", "2024-01-03"], stop="09:40")
    original = run(cfg)
    again = replay(ReplayStream.from_rows(original.trace), cfg)
    assert again.snapshots == original.snapshots


def test_single_order_replay_rests_from_its_time():
    t = parse_clock("10:00:01")
    rows = [(t, 0, "B", "L", 995, 3, 1, -1)]
    r = replay(ReplayStream.from_rows(rows), RunConfig(stop_at="10:00:10", snapshot_cadence_s=3.0))
    for s in r.snapshots:
        if s.timestamp >= t:
            assert s.levels[0][:2] == (995, 3)
        else:
            assert s.levels[0][:2] == (0, 0)


def test_two_day_replay_carries_book_over_close():
    day1 = parse_clock("10:00")
    rows = [(day1, 0, "B", "L", 990, 4, 1, -1), (day1, 0, "S", "L", 1010, 2, 2, -1)]
    cfg = RunConfig(days=["2024-01-02", "2024-01-03"], stop_at="09:31")
    r = replay(ReplayStream.from_rows(rows), dataclasses.replace(cfg, expire_day_orders=False))
    last = [s for s in r.snapshots if s.timestamp < 86400 * 10 ** 9][-1]
    first2 = [s for s in r.snapshots if s.timestamp > 86400 * 10 ** 9][0]
    assert first2.levels == last.levels
    r = replay(ReplayStream.from_rows(rows), cfg)
    first2 = [s for s in r.snapshots if s.timestamp > 86400 * 10 ** 9][0]
    assert first2.best_bid == 0 and first2.best_ask == 0


def test_intervention_sweeps_ask_side():
    cfg = mixed(n_assets=1, stop="09:40")
    base = run(cfg)
    iv = InterventionSpec(0, 1, "09:35", 25)
    shocked = run(dataclasses.replace(cfg, interventions=[iv]))
    t = parse_clock("09:35")
    sweep = [tr for tr in shocked.trades if tr.time == t and tr.aggressor_id == 1]
    assert sum(tr.volume for tr in sweep) == 25
    prices = [tr.price for tr in sweep]
    assert prices == sorted(prices) and prices[-1] > prices[0]
    pre = [s for s in shocked.snapshots if s.timestamp < t]
    assert pre == [s for s in base.snapshots if s.timestamp < t]
    assert shocked.trades != base.trades


def test_intervention_outside_continuous_is_rejected():
    cfg = mixed(n_assets=1, interventions=[InterventionSpec(0, 1, "12:00", 5)])
    with pytest.raises(ValueError):
        run(cfg)


def test_calibration_disabled_changes_nothing():
    a = run(mixed(n_assets=1, calibration=CalibrationConfig(enabled=False, L=5)))
    b = run(mixed(n_assets=1))
    assert a.snapshots == b.snapshots


class Spy(Agent):
    agent_type = "spy"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.seen = []

    def on_wakeup(self, view):
        s = view.snapshot(0)
        self.seen.append((view.time, s.timestamp))
        return AgentDecision([view.limit(0, Side.BUY, 990, 1)], view.time + 700_000_000)


def test_views_never_contain_future_state():
    for workers in (0, 2):
        cfg = mixed(n_assets=1, stop="09:35", workers=workers)
        sim = Simulation(cfg)
        spy = Spy(999, None, [0], cash=10 ** 9)
        sim.agents[spy.agent_id] = spy
        sim.exchange.ledger.open_account("agent:999", spy.cash, {})
        sim.run()
        assert spy.seen and all(ts <= t for t, ts in spy.seen)


def test_latency_delays_arrivals():
    cfg = RunConfig(stop_at="09:31", default_latency_ns=5_000_000,
                    agents=[{"type": "quote", "count": 1, "params": {"period_s": 1.0, "cash": 10 ** 9,
                                                                     "holdings": 100}}])
    r = run(cfg)
    assert r.trace and all(row[0] % 1_000_000_000 == 5_000_000 for row in r.trace)


def test_invalid_decision_rejected_wholesale():
    class Bad(Agent):
        agent_type = "bad"

        def on_wakeup(self, view):
            good = view.limit(0, Side.BUY, 990, 1)
            bad = view.limit(0, Side.BUY, 990, 0)
            return AgentDecision([good, bad], None)

    cfg = RunConfig(stop_at="09:31")
    sim = Simulation(cfg, agents=[Bad(5, None, [0], cash=10 ** 9)])
    r = sim.run()
    assert r.trace == [] and r.processed_orders == 0
    assert sim.agents[5].receipts and all(x.reason.startswith("InvalidDecision") for x in sim.agents[5].receipts)


def test_outputs_written(tmp_path):
    cfg = mixed(n_assets=1, stop="09:35", out_dir=str(tmp_path / "run"))
    r = run(cfg)
    files = {p.name for p in (tmp_path / "run").iterdir()}
    assert {"snapshots.csv", "main.csv", "trades.csv", "orders.csv", "report.txt"} <= files
    from evosim import io
    assert io.read_snapshot_log(str(tmp_path / "run" / "snapshots.csv")) == r.snapshots
    size = sum((tmp_path / "run" / f).stat().st_size for f in ("snapshots.csv", "main.csv"))
    assert size == r.log_size_bytes + len(io.snapshot_header(10)) + len(io.MAIN_HEADER)
