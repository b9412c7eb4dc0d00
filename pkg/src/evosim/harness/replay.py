"""Replay of recorded or historical order flow through the exchange."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .. import io
from ..book import LobSnapshot, Order
from ..config import CalibrationConfig, RunConfig
from ..sim import RunResult, Simulation


@dataclass
class ReplayStream:
    orders: List[Order] = field(default_factory=list)
    cursor: int = 0

    @classmethod
    def from_file(cls, path: str) -> "ReplayStream":
        return cls(io.read_order_trace(path))

    @classmethod
    def from_rows(cls, rows: Sequence[tuple]) -> "ReplayStream":
        """From trace rows ``(time, asset, side, type, price, volume, id, ref)``."""
        text = [io.TRACE_HEADER.strip().split(",")] + [[str(x) for x in r] for r in rows]
        return cls(io.parse_order_rows(text))

    def __len__(self) -> int:
        return len(self.orders)

    def __iter__(self) -> Iterator[Order]:
        return iter(self.orders)

    def next(self) -> Optional[Order]:
        if self.cursor >= len(self.orders):
            return None
        o = self.orders[self.cursor]
        self.cursor += 1
        return o


def replay_config(cfg: RunConfig) -> RunConfig:
    """The same market with every order source removed except the stream."""
    return dataclasses.replace(cfg, agents=[], population=None, interventions=[],
                               calibration=CalibrationConfig(), replay=None)


def replay(stream, cfg: RunConfig, initial_books: Optional[Dict[Tuple[int, int], LobSnapshot]] = None) -> RunResult:
    if isinstance(stream, str):
        stream = ReplayStream.from_file(stream)
    elif not isinstance(stream, ReplayStream):
        stream = ReplayStream(list(stream))
    orders = [dataclasses.replace(o) for o in stream.orders]
    return Simulation(replay_config(cfg), agents=[], replay=orders, initial_books=initial_books).run()


def mid_series(snaps: Sequence[LobSnapshot], asset: int) -> Tuple[np.ndarray, np.ndarray]:
    """Checkpoint times and mids (NaN where a side is empty)."""
    rows = [(s.timestamp, s.mid()) for s in snaps if s.asset == asset]
    t = np.array([r[0] for r in rows], dtype=np.int64)
    m = np.array([np.nan if r[1] is None else r[1] for r in rows], dtype=float)
    return t, m


def mid_alignment(sim: Sequence[LobSnapshot], ref: Sequence[LobSnapshot], asset: int,
                  tick_size: float = 0.01) -> Dict[str, float]:
    """Mid-price agreement between a run and a reference at shared checkpoints."""
    ts, ms = mid_series(sim, asset)
    tr, mr = mid_series(ref, asset)
    common, i, j = np.intersect1d(ts, tr, return_indices=True)
    d = (ms[i] - mr[j]) * tick_size
    ok = ~np.isnan(d)
    if not ok.any():
        return {"n": 0, "mse": float("nan"), "mae": float("nan")}
    return {"n": int(ok.sum()), "mse": float(np.mean(d[ok] ** 2)), "mae": float(np.mean(np.abs(d[ok])))}
