import random

import pytest

from evosim.kernel import (
    SIMULATION_END,
    CausalityError,
    EventKind,
    Kernel,
    LatencyModel,
    SliceSchedule,
)

from oracles import FlatQueue


def drain(k):
    out = []
    while True:
        ev = k.next_event()
        if ev is SIMULATION_END:
            return out
        out.append(ev)


def test_send_applies_latency():
    k = Kernel()
    k.now = 1_000
    ev = k.send("o", EventKind.ORDER_ARRIVAL, 1_000, LatencyModel(500))
    assert ev.due_time == 1_500


def test_zero_latency_gets_fresh_seq():
    k = Kernel()
    earlier = [k.schedule_at(5_000, EventKind.AGENT_WAKEUP, i) for i in range(3)]
    k.now = 1_000
    ev = k.send("o", EventKind.ORDER_ARRIVAL, 1_000, LatencyModel(0))
    assert ev.due_time == 1_000
    assert ev.seq > max(e.seq for e in earlier)


def test_send_rejects_past():
    k = Kernel()
    k.schedule_at(10, EventKind.AGENT_WAKEUP)
    k.next_event()
    with pytest.raises(CausalityError):
        k.send("x", EventKind.ORDER_ARRIVAL, 5)
    with pytest.raises(CausalityError):
        k.schedule_wakeup(1, 9)


def test_latency_per_class_pair():
    lat = LatencyModel(100, {("agent", "exchange"): 7})
    assert lat.delay("agent", "exchange") == 7
    assert lat.delay("exchange", "agent") == 100
    with pytest.raises(ValueError):
        LatencyModel(-1)


def test_tie_broken_by_seq():
    k = Kernel()
    a = k.schedule_at(100, EventKind.AGENT_WAKEUP, "a")
    b = k.schedule_at(100, EventKind.AGENT_WAKEUP, "b")
    assert a.seq < b.seq
    assert [e.payload for e in drain(k)] == ["a", "b"]


def test_empty_slices_skipped():
    k = Kernel(slice_width_ns=10)
    for b in (0, 3, 9):
        k.schedule_at(b * 10 + 1, EventKind.AGENT_WAKEUP, b)
    assert [e.payload for e in drain(k)] == [0, 3, 9]
    assert k.slices_visited == 3


def test_slice_end_hook_fires_per_visited_slice():
    ends = []
    k = Kernel(slice_width_ns=10, on_slice_end=ends.append)
    for t in (1, 2, 35, 91):
        k.schedule_at(t, EventKind.AGENT_WAKEUP)
    drain(k)
    assert ends == [10, 40, 100]


def test_slice_end_hook_may_schedule():
    k = Kernel(slice_width_ns=10)
    fired = []

    def hook(boundary):
        if boundary == 10:
            k.schedule_at(boundary + 3, EventKind.EXCHANGE_RESPONSE, "r")
        fired.append(boundary)

    k.on_slice_end = hook
    k.schedule_at(1, EventKind.AGENT_WAKEUP, "a")
    k.schedule_at(25, EventKind.AGENT_WAKEUP, "b")
    assert [e.payload for e in drain(k)] == ["a", "r", "b"]


def test_wakeup_at_now_ordering():
    k = Kernel()
    k.schedule_at(50, EventKind.AGENT_WAKEUP, "first")
    k.schedule_at(100, EventKind.AGENT_WAKEUP, "later")
    ev = k.next_event()
    assert ev.payload == "first"
    k.schedule_wakeup(7, 50)
    order = [e.payload for e in drain(k)]
    assert order == [7, "later"]


def test_periodic_wakeups_count():
    k = Kernel(slice_width_ns=10**8)
    step, end = 3 * 10**9, 60 * 10**9
    k.schedule_wakeup(0, step)
    n = 0
    while True:
        ev = k.next_event()
        if ev is SIMULATION_END:
            break
        n += 1
        if ev.due_time + step <= end:
            k.schedule_wakeup(0, ev.due_time + step)
    assert n == 20


def test_horizon_end():
    k = Kernel(horizon_end=100)
    k.schedule_at(50, EventKind.AGENT_WAKEUP)
    k.schedule_at(150, EventKind.AGENT_WAKEUP)
    assert len(drain(k)) == 1


@pytest.mark.parametrize("seed", range(5))
def test_random_sends_match_flat_queue(seed):
    rng = random.Random(seed)
    k = Kernel(slice_width_ns=1_000)
    oracle = FlatQueue()
    for _ in range(10_000):
        ev = k.send(None, EventKind.ORDER_ARRIVAL, rng.randrange(100_000), LatencyModel(rng.randrange(5_000)))
        oracle.push(ev.due_time, ev.seq)
    got = [(e.due_time, e.seq) for e in drain(k)]
    want = [oracle.pop()[:2] for _ in range(len(oracle))]
    assert got == want


def test_interleaved_agent_wakeups_preserve_per_agent_order():
    rng = random.Random(3)
    k = Kernel(slice_width_ns=777)
    oracle = FlatQueue()
    scheduled = {a: [] for a in range(100)}
    for _ in range(5_000):
        a = rng.randrange(100)
        t = rng.randrange(50_000)
        ev = k.schedule_wakeup(a, t)
        scheduled[a].append((t, ev.seq))
        oracle.push(t, ev.seq, a)
    got = drain(k)
    want = [oracle.pop() for _ in range(len(oracle))]
    assert [(e.due_time, e.seq, e.payload) for e in got] == want
    per_agent = {a: [] for a in range(100)}
    for e in got:
        per_agent[e.payload].append((e.due_time, e.seq))
    for a in range(100):
        assert per_agent[a] == sorted(scheduled[a])


def test_dynamic_workload_matches_flat_queue():
    """Events spawn children while draining; dispatch order must match the flat oracle."""
    rng = random.Random(11)
    k = Kernel(slice_width_ns=500)
    oracle = FlatQueue()
    for _ in range(200):
        ev = k.schedule_at(rng.randrange(1000), EventKind.AGENT_WAKEUP)
        oracle.push(ev.due_time, ev.seq)
    dispatched = 0
    last = -1
    while True:
        ev = k.next_event()
        if ev is SIMULATION_END:
            break
        want = oracle.pop()
        assert (ev.due_time, ev.seq) == want[:2]
        assert ev.due_time >= last
        last = ev.due_time
        dispatched += 1
        if dispatched < 20_000:
            for _ in range(rng.choice((0, 1, 1, 2))):
                child = k.send(None, EventKind.ORDER_ARRIVAL, k.now, LatencyModel(rng.choice((0, 0, 3, 700, 5000))))
                oracle.push(child.due_time, child.seq)
    assert len(oracle) == 0


def test_insertion_touches_only_its_slice():
    s = SliceSchedule(10)
    k = Kernel(slice_width_ns=10)
    k.schedule = s
    for t in (5, 25, 45):
        k.schedule_at(t, EventKind.AGENT_WAKEUP)
    before = {b: list(q) for b, q in s.slices.items()}
    k.schedule_at(27, EventKind.AGENT_WAKEUP)
    after = s.slices
    assert after[0] == before[0] and after[4] == before[4]
    assert len(after[2]) == 2
    assert s.slice_index_pushes == 3
