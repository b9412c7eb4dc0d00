"""Throughput, breadth-scaling and ablation experiments on a synthetic open-loop workload."""
from __future__ import annotations

import dataclasses
import multiprocessing as mp
import resource
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from ..config import RunConfig
from ..exchange.calendar import format_clock, parse_clock
from ..exchange.exchange import AssetSpec
from ..kernel import NS_PER_S
from ..sim import Simulation

OPEN = "09:30"


@dataclass
class RunReport:
    label: str
    processed_orders: int
    emitted_orders: int
    rejected_orders: int
    wall_clock_s: float
    peak_memory_bytes: int
    log_size_bytes: int
    series: Dict[str, list] = field(default_factory=dict)

    @property
    def throughput(self) -> float:
        return self.processed_orders / self.wall_clock_s if self.wall_clock_s > 0 else 0.0

    def to_text(self) -> str:
        keys = ("label", "throughput", "processed_orders", "emitted_orders", "rejected_orders", "wall_clock_s",
                "peak_memory_bytes", "log_size_bytes")
        return "\n".join(f"{k}={getattr(self, k)}" for k in keys) + "\n"


def stress_config(rate: float, duration_s: float, assets: int, workers: int = 0, async_commit: bool = False,
                  cadence_s: float = 3.0, main_log: bool = True, seed: int = 0, horizon_s: Optional[float] = None,
                  backend: str = "auto", record_trades: bool = False) -> RunConfig:
    """One stress source per asset, injecting from the continuous open."""
    start = parse_clock(OPEN)
    horizon = start + int((horizon_s if horizon_s is not None else duration_s + 1) * NS_PER_S)
    agents = [{"type": "stress", "count": 1, "seed": 7 + a,
               "params": {"rate": rate, "duration_s": duration_s, "mid": 1000, "start": start,
                          "assets": [a], "cash": 10 ** 15, "holdings": 10 ** 9}}
              for a in range(assets)]
    return RunConfig(seed=seed, assets=[AssetSpec(a, 1000) for a in range(assets)], agents=agents,
                     stop_at=format_clock(horizon), workers=workers, backend=backend, async_commit=async_commit,
                     snapshot_cadence_s=cadence_s, main_log=main_log, record_orders=False,
                     record_trades=record_trades)


def peak_rss_bytes() -> int:
    """High-water RSS of this process image.

    ``ru_maxrss`` survives exec, so a spawned child would report its forking
    parent's peak; VmHWM is reset with the new address space.
    """
    try:
        with open("/proc/self/status") as f:
            for line in f:
                if line.startswith("VmHWM:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def _run(cfg: RunConfig, label: str, out_root: Optional[str]) -> RunReport:
    with tempfile.TemporaryDirectory(dir=out_root) as d:
        cfg = dataclasses.replace(cfg, out_dir=d)
        sim = Simulation(cfg)
        emitted = sum(getattr(a, "emitted_total", 0) for a in sim.agents.values())
        r = sim.run()
    peak = peak_rss_bytes()
    mids = {a: [s.mid() for s in r.snapshot_series(a)] for a in sim.asset_ids}
    return RunReport(label, r.processed_orders, emitted, r.rejected_orders, r.wall_clock_s, peak,
                     r.log_size_bytes, {"mid": mids})


def _child(conn, cfg, label, out_root):
    try:
        conn.send(("ok", _run(cfg, label, out_root)))
    except Exception as e:  # pragma: no cover - surfaced in the parent
        conn.send(("err", repr(e)))
    conn.close()


def run_report(cfg: RunConfig, label: str = "", isolate: bool = False, out_root: Optional[str] = None) -> RunReport:
    """Run and report; ``isolate`` uses a fresh process so peak memory is per run."""
    if not isolate:
        return _run(cfg, label, out_root)
    ctx = mp.get_context("spawn")
    parent, child = ctx.Pipe(duplex=False)
    p = ctx.Process(target=_child, args=(child, cfg, label, out_root))
    p.start()
    child.close()
    status, payload = parent.recv()
    p.join()
    if status != "ok":
        raise RuntimeError(f"isolated run failed: {payload}")
    return payload


def stress_throughput(rate: float, duration_s: float = 1.0, assets: int = 1, workers: int = 0,
                      isolate: bool = False, **kw) -> RunReport:
    cfg = stress_config(rate, duration_s, assets, workers, **kw)
    return run_report(cfg, f"rate={rate:g},assets={assets}", isolate)


def bench(rates: Sequence[float], duration_s: float = 1.0, assets: int = 1, workers: int = 0,
          **kw) -> List[RunReport]:
    return [stress_throughput(r, duration_s, assets, workers, **kw) for r in rates]


def breadth_scaling(asset_counts: Sequence[int], per_asset_rate: float = 200.0, duration_s: float = 5.0,
                    workers: int = 4, **kw) -> List[RunReport]:
    """Wall-clock and memory versus market breadth at a fixed per-asset rate."""
    return [stress_throughput(per_asset_rate, duration_s, n, workers, isolate=True, **kw) for n in asset_counts]


def scaling_shape(reports: Sequence[RunReport], asset_counts: Sequence[int], workers: int,
                  tol: float = 0.30) -> Dict[str, object]:
    """Flat up to the worker budget, linear beyond, memory increasing."""
    wall = dict(zip(asset_counts, (r.wall_clock_s for r in reports)))
    mem = [r.peak_memory_bytes for r in reports]
    inside = [wall[n] for n in asset_counts if n <= workers]
    flat = max(inside) <= (1 + tol) * min(inside) if inside else True
    base_n = max((n for n in asset_counts if n <= workers), default=min(asset_counts))
    linear = True
    ratios = {}
    for n in asset_counts:
        if n > workers:
            expected = n / base_n
            got = wall[n] / wall[base_n]
            ratios[n] = got / expected
            linear &= abs(got / expected - 1) <= tol
    monotone = all(b > a for a, b in zip(mem, mem[1:]))
    return {"flat": flat, "linear": linear, "memory_monotone": monotone, "linear_ratios": ratios,
            "wall": wall, "memory": mem}
