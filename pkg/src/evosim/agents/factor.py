"""Shared-factor linkage: an AR(1) common factor and agents trading on it."""
from __future__ import annotations

from typing import Dict, Optional, Sequence

import numpy as np

from ..book import Side
from ..exchange.calendar import Phase
from ..kernel import NS_PER_S
from .base import Agent, AgentDecision, MarketView


class FactorState:
    """Seed-deterministic AR(1) path ``f[n+1] = phi f[n] + sigma eps`` on a
    ``dt`` grid from ``t0``, plus per-asset loadings drawn once in [-1, 1].
    """

    def __init__(self, seed: int, assets: Sequence[int], phi: float = 0.95, sigma: float = 1.0,
                 dt_s: float = 1.0, t0: int = 0, loadings: Optional[Dict[int, float]] = None):
        self.phi = float(phi)
        self.sigma = float(sigma)
        self.dt = int(float(dt_s) * NS_PER_S)
        self.t0 = t0
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFAC7]))
        draws = self.rng.uniform(-1.0, 1.0, len(assets))
        self.loadings = {a: float(x) for a, x in zip(assets, draws)}
        if loadings:
            self.loadings.update({int(a): float(v) for a, v in loadings.items()})
        sd0 = self.sigma / np.sqrt(max(1e-12, 1 - self.phi ** 2))
        self.path = [float(self.rng.normal(0.0, sd0))]

    def value_at(self, t: int) -> float:
        n = max(0, (t - self.t0) // self.dt)
        path = self.path
        while len(path) <= n:
            path.append(self.phi * path[-1] + self.sigma * float(self.rng.normal()))
        return path[n]

    def loading(self, asset: int) -> float:
        return self.loadings[asset]


class FactorAgent(Agent):
    """Buys at market when loading x factor exceeds ``threshold``, sells below
    ``-threshold``; one batch across all its assets per wakeup."""

    agent_type = "factor"

    def __init__(self, *a, period_s=5.0, threshold=0.5, size=2, loadings=None, phase_s=None, **kw):
        super().__init__(*a, **kw)
        self.period = int(float(period_s) * NS_PER_S)
        self.threshold = float(threshold)
        self.size = int(size)
        self.own_loadings = {int(k): float(v) for k, v in (loadings or {}).items()}
        off = self.rng.uniform(0, float(period_s)) if phase_s is None else float(phase_s)
        self.phase_offset = int(off * NS_PER_S)

    def first_wakeup(self, start: int) -> Optional[int]:
        return start + self.phase_offset

    def loading(self, view: MarketView, asset: int) -> float:
        if asset in self.own_loadings:
            return self.own_loadings[asset]
        return view.factor.loading(asset) if view.factor is not None else 0.0

    def on_wakeup(self, view: MarketView) -> AgentDecision:
        now = view.time
        if view.phase is not Phase.CONTINUOUS:
            nxt = view.next_open(now + 1)
            while nxt is not None and view.calendar.phase_at(nxt) is not Phase.CONTINUOUS:
                nxt = view.next_open(view.calendar.session_at(nxt).end)
            return AgentDecision([], None if nxt is None else nxt + self.phase_offset)
        f = view.factor.value_at(now) if view.factor is not None else 0.0
        batch = []
        for asset in self.assets:
            s = self.loading(view, asset) * f
            if s > self.threshold:
                batch.append(view.market(asset, Side.BUY, self.size))
            elif s < -self.threshold:
                q = min(self.size, view.portfolio.h_avail.get(asset, 0))
                if q:
                    batch.append(view.market(asset, Side.SELL, q))
        return AgentDecision(batch, now + self.period)
