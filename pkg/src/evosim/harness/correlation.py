"""Cross-asset correlation of bucketed mid-price log returns."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..book import LobSnapshot
from ..kernel import NS_PER_S

MIN_BUCKETS = 30


@dataclass
class CorrelationResult:
    assets: List[int]
    matrix: np.ndarray
    returns: np.ndarray                 # (buckets, assets)
    flagged: List[int] = field(default_factory=list)   # zero-variance assets, rows left NaN

    def mean_abs_offdiag(self) -> float:
        n = len(self.assets)
        mask = ~np.eye(n, dtype=bool)
        vals = np.abs(self.matrix[mask])
        return float(np.nanmean(vals))


def bucket_mids(snaps: Sequence[LobSnapshot], assets: Sequence[int], bucket_ns: int) -> np.ndarray:
    """Last valid mid per bucket and asset, forward-filled; leading buckets
    without a mid for every asset are dropped."""
    last: Dict[int, Dict[int, float]] = {a: {} for a in assets}
    for s in snaps:
        if s.asset in last:
            m = s.mid()
            if m is not None:
                last[s.asset][s.timestamp // bucket_ns] = m
    keys = sorted({k for d in last.values() for k in d})
    out = np.full((len(keys), len(assets)), np.nan)
    for j, a in enumerate(assets):
        prev = np.nan
        col = last[a]
        for i, k in enumerate(keys):
            prev = col.get(k, prev)
            out[i, j] = prev
    ok = ~np.isnan(out).any(axis=1)
    first = int(np.argmax(ok)) if ok.any() else len(keys)
    return out[first:]


def pearson(r: np.ndarray) -> tuple:
    """Column correlation; zero-variance columns give NaN rows and are reported."""
    x = r - r.mean(axis=0)
    ss = np.sqrt((x * x).sum(axis=0))
    flat = ss == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        z = x / ss
        c = z.T @ z
    c = np.clip(c, -1.0, 1.0)
    idx = np.where(~flat)[0]
    c[idx, idx] = 1.0
    c[flat, :] = np.nan
    c[:, flat] = np.nan
    return c, [int(i) for i in np.where(flat)[0]]


def cross_asset_correlation(snaps: Sequence[LobSnapshot], assets: Optional[Sequence[int]] = None,
                            bucket_s: float = 60.0) -> CorrelationResult:
    if assets is None:
        assets = sorted({s.asset for s in snaps})
    assets = list(assets)
    if len(assets) < 2:
        raise ValueError("correlation needs at least two assets")
    mids = bucket_mids(snaps, assets, int(bucket_s * NS_PER_S))
    if len(mids) < MIN_BUCKETS + 1:
        raise ValueError(f"need at least {MIN_BUCKETS} aligned return buckets, got {max(len(mids) - 1, 0)}")
    r = np.diff(np.log(mids), axis=0)
    c, flat = pearson(r)
    return CorrelationResult(assets, c, r, [assets[i] for i in flat])


def paired_signflip_test(diffs: Sequence[float]) -> float:
    """Exact one-sided p-value that the mean paired difference is > 0."""
    d = np.asarray(diffs, dtype=float)
    obs = d.mean()
    n = len(d)
    hits = 0
    for signs in product((1.0, -1.0), repeat=n):
        if (d * np.array(signs)).mean() >= obs - 1e-15:
            hits += 1
    return hits / 2 ** n
