"""Reference-snapshot oracle with intervention-scaled Gaussian noise."""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..book import LobSnapshot

log = logging.getLogger(__name__)


class MissingReference(LookupError):
    pass


@dataclass(frozen=True)
class NoiseParams:
    sigma0_sq: float = 0.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma0_sq < 0 or self.alpha < 0:
            raise ValueError("noise parameters must be non-negative")

    def variance(self, V: float) -> float:
        return self.sigma0_sq + self.alpha * V


def repair(levels: np.ndarray, l: int) -> Tuple[Tuple[int, int, int, int], ...]:
    """Round, clamp, merge, re-sort and uncross perturbed ``(n, 4)`` rows."""
    sides = []
    for c, desc in ((0, True), (2, False)):
        agg: Dict[int, int] = {}
        for p, v in levels[:, c:c + 2]:
            pi = int(np.floor(p + 0.5))
            vi = max(int(np.floor(v + 0.5)), 0)
            if pi < 1 or vi == 0:
                continue
            agg[pi] = agg.get(pi, 0) + vi
        sides.append(sorted(agg.items(), reverse=desc))
    bids, asks = sides
    while bids and asks and bids[0][0] >= asks[0][0]:
        if asks[0][1] < bids[0][1]:
            asks.pop(0)
        else:
            bids.pop(0)
    return LobSnapshot.from_sides(bids, asks, l).levels


@dataclass
class OracleSource:
    """Per-asset reference series; ``query`` returns the perturbed reference.

    Noise of variance ``sigma0_sq + alpha * V`` is drawn i.i.d. for the price
    and depth of every non-padded level among the first ``L``; deeper levels
    pass through unchanged.
    """

    reference: Dict[int, List[LobSnapshot]]
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    L: int = 10
    strict: bool = False
    warnings: int = 0

    def __post_init__(self) -> None:
        self._times: Dict[int, List[int]] = {}
        for a, snaps in self.reference.items():
            times = [s.timestamp for s in snaps]
            if times != sorted(times):
                raise ValueError(f"reference series for asset {a} is not time ordered")
            self._times[a] = times
        self._rngs: Dict[int, np.random.Generator] = {}

    def rng(self, asset: int) -> np.random.Generator:
        g = self._rngs.get(asset)
        if g is None:
            g = self._rngs[asset] = np.random.default_rng(np.random.SeedSequence([self.seed, asset]))
        return g

    def reference_at(self, asset: int, t: int) -> LobSnapshot:
        times = self._times.get(asset)
        if not times:
            raise MissingReference(f"no reference series for asset {asset}")
        i = bisect.bisect_right(times, t) - 1
        if i < 0:
            raise MissingReference(f"no reference at or before t={t} for asset {asset}")
        if times[i] != t:
            if self.strict:
                raise MissingReference(f"no reference at t={t} for asset {asset}")
            self.warnings += 1
            log.warning("asset %d: no reference at t=%d, using t=%d", asset, t, times[i])
        return self.reference[asset][i]

    def raw_perturbation(self, asset: int, V: float, size) -> np.ndarray:
        sd = np.sqrt(self.noise.variance(V))
        return self.rng(asset).normal(0.0, 1.0, size) * sd

    def query(self, asset: int, t: int, V: float = 0.0) -> LobSnapshot:
        ref = self.reference_at(asset, t)
        var = self.noise.variance(V)
        if var == 0:
            return LobSnapshot(ref.levels, t, asset)
        arr = ref.as_array().astype(float)
        n = min(self.L, ref.depth)
        eps = self.raw_perturbation(asset, V, (n, 4))
        mask = np.zeros((n, 4))
        mask[:, 0:2] = (arr[:n, 0] > 0)[:, None]
        mask[:, 2:4] = (arr[:n, 2] > 0)[:, None]
        arr[:n] += eps * mask
        return LobSnapshot(repair(arr, ref.depth), t, asset)


def reference_from_log(rows: Sequence[LobSnapshot]) -> Dict[int, List[LobSnapshot]]:
    out: Dict[int, List[LobSnapshot]] = {}
    for s in rows:
        out.setdefault(s.asset, []).append(s)
    for v in out.values():
        v.sort(key=lambda s: s.timestamp)
    return out
