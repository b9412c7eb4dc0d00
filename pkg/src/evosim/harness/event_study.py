"""Step-jump interventions and event-time aligned trajectories."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import InterventionSpec, RunConfig, event_time
from ..exchange.calendar import Phase
from ..sim import Simulation, build_calendar
from .replay import mid_series


@dataclass
class EventStudyResult:
    asset: int
    event_time: int
    offsets_ns: np.ndarray                       # event-time grid, 0 = first checkpoint at or after the event
    baseline: np.ndarray                         # baseline mids on the grid
    runs: Dict[int, List[np.ndarray]] = field(default_factory=dict)
    mean: Dict[int, np.ndarray] = field(default_factory=dict)
    prefix_identical: bool = True

    def first_window_delta(self, direction: int, width: int = 1) -> float:
        """Mean post-event mid minus baseline over the first ``width`` grid points."""
        return float(np.nanmean(self.mean[direction][:width] - self.baseline[:width]))

    def rows(self) -> List[str]:
        head = "offset_ns,baseline," + ",".join(f"mean_{'up' if d > 0 else 'down'}" for d in sorted(self.mean))
        out = [head]
        for k, off in enumerate(self.offsets_ns):
            vals = [self.baseline[k]] + [self.mean[d][k] for d in sorted(self.mean)]
            out.append(f"{off}," + ",".join(f"{v:.6g}" for v in vals))
        return out


def _strip(cfg: RunConfig) -> RunConfig:
    return dataclasses.replace(cfg, interventions=[], calibration=dataclasses.replace(cfg.calibration, enabled=False),
                               out_dir=None)


def _check_time(cfg: RunConfig, t: int) -> None:
    cal = build_calendar(cfg)
    if cal.phase_at(t) is not Phase.CONTINUOUS:
        raise ValueError(f"event time {t} is not inside a continuous-trading session")


def event_study(base: RunConfig, intervention: InterventionSpec, repeats: int = 10,
                directions=(1, -1), sigma0_sq: Optional[float] = None, alpha: Optional[float] = None,
                noise_seed: int = 0, reference_mode: str = "shocked") -> EventStudyResult:
    """Baseline once; per direction a shocked run, then ``repeats`` calibrated
    interventional runs with distinct oracle noise seeds, all aligned on the
    recording grid from the event.

    ``reference_mode`` picks the oracle's centre: ``"shocked"`` uses the
    uncalibrated interventional run, ``"baseline"`` the unperturbed one.
    """
    if reference_mode not in ("shocked", "baseline"):
        raise ValueError("reference_mode must be 'shocked' or 'baseline'")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    base = _strip(base)
    n_days = len(build_calendar(base).days)
    t_ev = event_time(intervention.event_time, n_days)
    _check_time(base, t_ev)
    cal_cfg = base.calibration
    s0 = cal_cfg.sigma0_sq if sigma0_sq is None else sigma0_sq
    al = cal_cfg.alpha if alpha is None else alpha
    a = intervention.asset

    baseline = Simulation(base).run()
    tb, mb = mid_series(baseline.snapshots, a)
    post = tb >= t_ev
    grid = tb[post]
    res = EventStudyResult(a, t_ev, grid - t_ev, mb[post])
    pre_base = [s for s in baseline.snapshots if s.timestamp < t_ev]

    for d in directions:
        iv = dataclasses.replace(intervention, direction=d, event_time=t_ev)
        shocked_cfg = dataclasses.replace(base, interventions=[iv])
        shocked = Simulation(shocked_cfg).run()
        src = shocked if reference_mode == "shocked" else baseline
        reference = {x: src.snapshot_series(x) for x in sorted({s.asset for s in src.snapshots})}
        runs = []
        for r in range(repeats):
            c = dataclasses.replace(cal_cfg, enabled=True, reference=None, start=t_ev, sigma0_sq=s0, alpha=al,
                                    noise_seed=noise_seed + 1000 * (d > 0) + r)
            out = Simulation(dataclasses.replace(shocked_cfg, calibration=c), reference=reference).run()
            pre = [s for s in out.snapshots if s.timestamp < t_ev]
            if pre != pre_base:
                res.prefix_identical = False
            t, m = mid_series(out.snapshots, a)
            runs.append(m[t >= t_ev])
        res.runs[d] = runs
        res.mean[d] = np.mean(np.vstack(runs), axis=0)
    return res
