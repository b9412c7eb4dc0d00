"""Order-space coverage: where agents place limit orders relative to mid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np

# symlog edges on tick offset, log10 edges on size
DT_EDGES = np.array([-math.inf] + [s * (10 ** e) for s, e in
                                  [(-1, 3), (-1, 2.5), (-1, 2), (-1, 1.5), (-1, 1), (-1, 0.5), (-1, 0)]]
                    + [-0.5, 0.5] + [10 ** e for e in (0, 0.5, 1, 1.5, 2, 2.5, 3)] + [math.inf])
Q_EDGES = np.array([10 ** (k / 2) for k in range(0, 11)] + [math.inf])


def delta_tick(price: float, mid: float, tick: float = 1.0) -> float:
    return round((price - mid) / tick, 9)


@dataclass
class CoverageHistogram:
    counts: np.ndarray
    dt_edges: np.ndarray = field(default_factory=lambda: DT_EDGES)
    q_edges: np.ndarray = field(default_factory=lambda: Q_EDGES)
    excluded: int = 0
    n: int = 0


def coverage_stats(rows: Iterable[Tuple], tick: float = 1.0) -> Dict[str, CoverageHistogram]:
    """Per agent type 2-D counts over (tick offset, size).

    ``rows`` are ``(time, agent_type, side, price, mid, size)``; prices in the
    same unit as ``tick``. Rows whose mid is missing are counted in
    ``excluded`` instead of binned.
    """
    out: Dict[str, CoverageHistogram] = {}
    shape = (len(DT_EDGES) - 1, len(Q_EDGES) - 1)
    for _, kind, _, price, mid, size in rows:
        h = out.get(kind)
        if h is None:
            h = out[kind] = CoverageHistogram(np.zeros(shape, dtype=np.int64))
        if mid is None or (isinstance(mid, float) and math.isnan(mid)) or mid <= 0:
            h.excluded += 1
            continue
        d = delta_tick(price, mid, tick)
        i = int(np.searchsorted(DT_EDGES, d, side="right")) - 1
        j = int(np.searchsorted(Q_EDGES, size, side="right")) - 1
        h.counts[i, j] += 1
        h.n += 1
    return out
