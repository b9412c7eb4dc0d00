"""Engine ablations over workers, async commits, snapshot cadence and main log."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import RunConfig
from .stress import RunReport, run_report, stress_config

# name -> (workers on, async, cadence seconds, main log)
CONFIGS = {
    "C0": (False, False, 3.0, True),
    "C1": (True, False, 3.0, True),
    "C2": (True, True, 3.0, True),
    "C3": (True, True, 30.0, True),
    "C4": (True, True, 30.0, False),
}


@dataclass
class AblationTable:
    reports: Dict[str, RunReport]                               # fastest run per config
    rounds: List[Dict[str, RunReport]] = field(default_factory=list)

    def rows(self) -> List[str]:
        out = ["config,workers,async,cadence_s,main_log,throughput,wall_clock_s,log_size_bytes"]
        for name, r in self.reports.items():
            w, a, c, m = CONFIGS[name]
            out.append(f"{name},{int(w)},{int(a)},{c:g},{int(m)},{r.throughput:.1f},{r.wall_clock_s:.4f},"
                       f"{r.log_size_bytes}")
        return out

    def speedup(self, a: str, b: str) -> float:
        """Median over rounds of throughput(a) / throughput(b); pairs are timed
        in the same round, so slow machine drift cancels."""
        rounds = self.rounds or [self.reports]
        return float(np.median([r[a].throughput / r[b].throughput for r in rounds]))

    def checks(self, slack: float = 0.03) -> Dict[str, bool]:
        """Directional claims; ``slack`` absorbs timer noise on the >= comparisons."""
        r = self.reports
        return {
            "workers_faster": self.speedup("C1", "C0") > 1.0,
            "async_not_slower": self.speedup("C2", "C1") >= 1 - slack,
            "cadence_ratio": 8.0 <= self.cadence_ratio() <= 12.0,
            "main_log_smaller": r["C4"].log_size_bytes < r["C3"].log_size_bytes,
            "main_log_not_slower": self.speedup("C4", "C3") >= 1 - slack,
        }

    def cadence_ratio(self) -> float:
        return self.reports["C2"].log_size_bytes / self.reports["C3"].log_size_bytes


def ablation_suite(base: Optional[RunConfig] = None, workers: int = 4, repeats: int = 3,
                   rate: float = 40.0, duration_s: float = 600.0, assets: int = 4,
                   isolate: bool = True) -> AblationTable:
    """Same workload under every toggle set, ``repeats`` rounds. Rounds
    alternate direction through the configs so linear drift hits neighbours
    alike; ``isolate`` gives every run a fresh interpreter."""
    if base is None:
        base = stress_config(rate, duration_s, assets)
    cfgs = {name: dataclasses.replace(base, workers=workers if w else 0, async_commit=a, snapshot_cadence_s=c,
                                      main_log=m)
            for name, (w, a, c, m) in CONFIGS.items()}
    names = list(cfgs)
    reports: Dict[str, RunReport] = {}
    rounds = []
    for k in range(max(1, repeats)):
        one = {}
        for name in (names if k % 2 == 0 else names[::-1]):
            r = one[name] = run_report(cfgs[name], name, isolate=isolate)
            if name not in reports or r.wall_clock_s < reports[name].wall_clock_s:
                reports[name] = r
        rounds.append(one)
    return AblationTable({n: reports[n] for n in names}, rounds)
