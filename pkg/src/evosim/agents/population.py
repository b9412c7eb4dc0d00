"""Population specs: which agent types, how many, and their parameters."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Type

import numpy as np

from .base import Agent
from .factor import FactorAgent
from .quote import QuoteUpdater
from .stress import StressSource
from .zi import ZIAgent

REGISTRY: Dict[str, Type[Agent]] = {
    "zi": ZIAgent,
    "quote": QuoteUpdater,
    "factor": FactorAgent,
    "stress": StressSource,
}


class UnknownAgentType(ValueError):
    pass


@dataclass
class PopulationEntry:
    type: str
    count: int
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PopulationEntry":
        extra = set(d) - {"type", "count", "params", "seed"}
        if extra:
            raise ValueError(f"unknown population keys: {sorted(extra)}")
        return cls(str(d["type"]), int(d.get("count", 1)), dict(d.get("params") or {}), int(d.get("seed", 0)))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type, "count": self.count, "params": self.params, "seed": self.seed}


def _draw(value: Any, rng: np.random.Generator) -> Any:
    """``[lo, hi]`` ranges are drawn uniformly (integers when both ends are)."""
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        lo, hi = value
        if isinstance(lo, int) and isinstance(hi, int):
            return int(rng.integers(lo, hi + 1))
        return float(rng.uniform(lo, hi))
    return value


def _assets_for(spec: Any, index: int, assets: Sequence[int]) -> List[int]:
    if spec is None or spec == "all":
        return list(assets)
    if spec == "round_robin":
        return [assets[index % len(assets)]]
    return [int(a) for a in spec]


def spawn_population(entries: Sequence[PopulationEntry], master_seed: int, assets: Sequence[int],
                     start_id: int = 0) -> List[Agent]:
    """Deterministic agents; agent ``i`` draws from ``SeedSequence([master, entry seed, i])``."""
    for e in entries:
        if e.type not in REGISTRY:
            raise UnknownAgentType(f"unknown agent type {e.type!r}")
        if e.count < 0:
            raise ValueError("agent count must be non-negative")
    agents: List[Agent] = []
    idx = start_id
    for e in entries:
        cls = REGISTRY[e.type]
        for k in range(e.count):
            rng = np.random.default_rng(np.random.SeedSequence([master_seed, e.seed, idx]))
            params = {name: _draw(v, rng) for name, v in e.params.items() if name not in ("assets", "holdings", "cash")}
            mine = _assets_for(e.params.get("assets"), k, assets)
            hold = e.params.get("holdings", 0)
            if isinstance(hold, dict):
                holdings = {int(a): int(v) for a, v in hold.items()}
            else:
                holdings = {a: int(_draw(hold, rng)) for a in mine}
            cash = int(_draw(e.params.get("cash", 0), rng))
            agents.append(cls(idx, rng, mine, cash=cash, holdings=holdings, **params))
            idx += 1
    return agents
