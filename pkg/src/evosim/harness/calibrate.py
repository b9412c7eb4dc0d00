"""Calibrated runs against a reference trajectory and their error metrics."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from ..book import LobSnapshot
from ..config import RunConfig
from ..sim import RunResult, Simulation


@dataclass
class CalibrationReport:
    result: RunResult
    times: np.ndarray
    mse: np.ndarray            # per checkpoint, currency^2
    wall_clock_s: float

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse)) if len(self.mse) else float("nan")

    @property
    def max_mse(self) -> float:
        return float(np.max(self.mse)) if len(self.mse) else float("nan")


def price_mse(sim: LobSnapshot, ref: LobSnapshot, levels: int = 5, tick_size: float = 0.01) -> float:
    """Mean squared price error over bid and ask levels ``1..levels``."""
    a = np.asarray(sim.levels[:levels], dtype=float)[:, [0, 2]]
    b = np.asarray(ref.levels[:levels], dtype=float)[:, [0, 2]]
    return float(np.mean(((a - b) * tick_size) ** 2))


def reference_dict(snaps: Sequence[LobSnapshot]) -> Dict[int, List[LobSnapshot]]:
    out: Dict[int, List[LobSnapshot]] = {}
    for s in snaps:
        out.setdefault(s.asset, []).append(s)
    return out


def calibrated_run(cfg: RunConfig, reference: Dict[int, List[LobSnapshot]], levels: int = 5,
                   tick_size: float = 0.01) -> CalibrationReport:
    c = dataclasses.replace(cfg.calibration, enabled=True)
    r = Simulation(dataclasses.replace(cfg, calibration=c), reference=reference).run()
    index = {(s.asset, s.timestamp): s for snaps in reference.values() for s in snaps}
    times, errs = [], []
    for s in r.snapshots:
        ref = index.get((s.asset, s.timestamp))
        if ref is not None:
            times.append(s.timestamp)
            errs.append(price_mse(s, ref, levels, tick_size))
    return CalibrationReport(r, np.array(times), np.array(errs), r.wall_clock_s)
