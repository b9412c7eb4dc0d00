"""Level-wise gap between a simulated and a target snapshot."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from ..book import LobSnapshot

BID, ASK = 0, 1
PRICE, DEPTH = 0, 1


@dataclass(frozen=True)
class GapTensor:
    """``values[side, level, kind]`` = target minus simulated, padding read as zero.

    ``side`` is BID/ASK and ``kind`` is PRICE (ticks) or DEPTH (lots).
    """

    values: np.ndarray

    @property
    def levels(self) -> int:
        return self.values.shape[1]

    def is_zero(self) -> bool:
        return not self.values.any()

    def norm(self, w_p: float = 1.0) -> float:
        v = np.abs(self.values).astype(float)
        return float(w_p * v[:, :, PRICE].sum() + v[:, :, DEPTH].sum())

    def entries(self, w_p: float = 1.0) -> Iterator[Tuple[float, int, int, int]]:
        """Nonzero ``(weighted magnitude, side, level, kind)`` largest first.

        Ties resolve to the shallower level, then bid before ask, then price
        before depth, so the order is deterministic.
        """
        out = []
        sides, lvls, kinds = np.nonzero(self.values)
        for s, i, k in zip(sides.tolist(), lvls.tolist(), kinds.tolist()):
            mag = abs(int(self.values[s, i, k])) * (w_p if k == PRICE else 1.0)
            out.append((-mag, i, s, k))
        out.sort()
        return ((-m, s, i, k) for m, i, s, k in out)


def compute_gap(simulated: LobSnapshot, target: LobSnapshot, L: Optional[int] = None) -> GapTensor:
    if simulated.depth != target.depth:
        raise ValueError(f"snapshot depth mismatch: {simulated.depth} vs {target.depth}")
    n = simulated.depth if L is None else L
    if n > simulated.depth:
        raise ValueError(f"gap depth {n} exceeds snapshot depth {simulated.depth}")
    a = simulated.as_array()[:n]
    b = target.as_array()[:n]
    d = b - a
    out = np.empty((2, n, 2), dtype=np.int64)
    out[BID] = d[:, 0:2]
    out[ASK] = d[:, 2:4]
    return GapTensor(out)
