"""Run configuration: one structured file, YAML round-trip, line-anchored errors."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import yaml

from .exchange.calendar import A_SHARE_SESSIONS, NS_PER_DAY, parse_clock
from .exchange.exchange import AssetSpec
from .kernel import NS_PER_MS


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass
class CalibrationConfig:
    enabled: bool = False
    reference: Optional[str] = None
    L: int = 10
    max_orders: Optional[int] = None  # default 2L
    max_lots: int = 100_000
    w_p: float = 1.0
    start: Optional[str] = None  # event time; calibration runs at checkpoints >= start
    sigma0_sq: float = 0.0
    alpha: float = 0.0
    noise_seed: int = 0
    strict: bool = False


@dataclass
class InterventionSpec:
    asset: int
    direction: int
    event_time: Union[str, int]
    magnitude: int
    primitive: str = "step_jump"


@dataclass
class RunConfig:
    seed: int = 0
    days: List[str] = field(default_factory=lambda: ["2024-01-02"])
    sessions: Optional[List[List[str]]] = None
    calendar: Optional[str] = None
    stop_at: Optional[str] = None
    assets: List[AssetSpec] = field(default_factory=lambda: [AssetSpec(0, 1000)])
    population: Optional[str] = None
    agents: List[Dict[str, Any]] = field(default_factory=list)
    factor: Dict[str, float] = field(default_factory=lambda: {"phi": 0.95, "sigma": 1.0, "dt_s": 1.0})
    slice_width_ns: int = 100 * NS_PER_MS
    default_latency_ns: int = 0
    workers: int = 0
    backend: str = "auto"
    async_commit: bool = False
    snapshot_cadence_s: float = 3.0
    snapshot_levels: int = 10
    view_levels: int = 5
    log_snapshots: bool = True
    main_log: bool = True
    record_trades: bool = True
    record_orders: bool = True
    record_coverage: bool = False
    expire_day_orders: bool = True
    replay_bypass: bool = True
    replay: Optional[str] = None
    initial_snapshot: Optional[str] = None
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    interventions: List[InterventionSpec] = field(default_factory=list)
    out_dir: Optional[str] = None

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out_dir", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: Dict[str, Any], lines: Optional[Dict[str, int]] = None,
                  path: Optional[str] = None) -> "RunConfig":
        lines = lines or {}

        def err(key: str, msg: str) -> ConfigError:
            return ConfigError(f"{key}: {msg}", lines.get(key), path)

        if not isinstance(d, dict):
            raise ConfigError("top level must be a mapping", 1, path)
        names = {f.name for f in dataclasses.fields(cls)}
        for k in d:
            if k not in names:
                raise err(k, "unknown key")
        kw = dict(d)
        try:
            if "assets" in kw:
                kw["assets"] = [AssetSpec(**a) for a in kw["assets"]]
            if "calibration" in kw:
                kw["calibration"] = CalibrationConfig(**(kw["calibration"] or {}))
            if "interventions" in kw:
                kw["interventions"] = [InterventionSpec(**x) for x in kw["interventions"] or []]
        except TypeError as e:
            key = next((k for k in ("assets", "calibration", "interventions") if k in kw), "config")
            raise err(key, str(e)) from None
        cfg = cls(**kw)
        cfg.validate(lines, path)
        return cfg

    def validate(self, lines: Optional[Dict[str, int]] = None, path: Optional[str] = None,
                 check_files: bool = True) -> None:
        lines = lines or {}

        def err(key: str, msg: str) -> ConfigError:
            return ConfigError(f"{key}: {msg}", lines.get(key), path)

        def typed(key: str, kind, lo=None):
            v = getattr(self, key)
            if isinstance(v, bool) and kind is not bool:
                raise err(key, f"expected {kind.__name__}")
            if kind is float and isinstance(v, int):
                return
            if not isinstance(v, kind):
                raise err(key, f"expected {kind.__name__}, got {type(v).__name__}")
            if lo is not None and v < lo:
                raise err(key, f"must be >= {lo}")

        typed("seed", int, 0)
        typed("slice_width_ns", int, 1)
        typed("default_latency_ns", int, 0)
        typed("workers", int, 0)
        typed("snapshot_levels", int, 1)
        typed("view_levels", int, 1)
        typed("snapshot_cadence_s", float)
        if self.snapshot_cadence_s <= 0:
            raise err("snapshot_cadence_s", "must be positive")
        for b in ("async_commit", "log_snapshots", "main_log", "record_trades", "record_orders",
                  "record_coverage", "expire_day_orders", "replay_bypass"):
            typed(b, bool)
        if self.backend not in ("auto", "serial", "process"):
            raise err("backend", "must be one of auto, serial, process")
        if not self.days or len(set(self.days)) != len(self.days):
            raise err("days", "need at least one distinct trading day")
        if not self.assets:
            raise err("assets", "need at least one asset")
        ids = [a.asset for a in self.assets]
        if len(set(ids)) != len(ids) or min(ids) < 0:
            raise err("assets", "asset ids must be distinct and non-negative")
        for a in self.assets:
            if a.p_ref < 1 or not 0 <= a.eta < 1 or a.lot_size < 1 or a.tick_size <= 0:
                raise err("assets", f"asset {a.asset} has out-of-range fields")
        if self.stop_at is not None:
            try:
                parse_clock(self.stop_at)
            except ValueError as e:
                raise err("stop_at", str(e)) from None
        c = self.calibration
        if c.L < 1 or c.L > self.snapshot_levels:
            raise err("calibration", "L must be in [1, snapshot_levels]")
        if c.sigma0_sq < 0 or c.alpha < 0:
            raise err("calibration", "noise parameters must be non-negative")
        if c.max_lots < 1 or (c.max_orders is not None and c.max_orders < 1):
            raise err("calibration", "budget must be positive")
        for iv in self.interventions:
            if iv.direction not in (1, -1) or iv.magnitude < 0 or iv.asset not in ids:
                raise err("interventions", "direction must be +1/-1, magnitude >= 0, asset known")
        if check_files:
            for key in ("calendar", "population", "replay", "initial_snapshot"):
                p = getattr(self, key)
                if p is not None and not os.path.exists(p):
                    raise err(key, f"file not found: {p}")
            if c.enabled and c.reference is not None and not os.path.exists(c.reference):
                raise err("calibration", f"reference file not found: {c.reference}")

    def session_template(self):
        if self.sessions:
            return [tuple(s) for s in self.sessions]
        return A_SHARE_SESSIONS


def _key_lines(text: str) -> Dict[str, int]:
    node = yaml.compose(text)
    out: Dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            out[str(k.value)] = k.start_mark.line + 1
    return out


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    try:
        data = yaml.safe_load(text) or {}
        lines = _key_lines(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}",
                          mark.line + 1 if mark else None, path) from None
    base = os.path.dirname(os.path.abspath(path)) if path else None
    cfg = RunConfig.from_dict(data, lines, path) if base is None else _resolve(data, lines, path, base)
    return cfg


def _resolve(data, lines, path, base) -> RunConfig:
    # relative file references are taken relative to the config file
    def fix(p):
        return p if p is None or os.path.isabs(p) else os.path.normpath(os.path.join(base, p))

    if isinstance(data, dict):
        for k in ("calendar", "population", "replay", "initial_snapshot"):
            if data.get(k):
                data[k] = fix(data[k])
        cal = data.get("calibration")
        if isinstance(cal, dict) and cal.get("reference"):
            cal["reference"] = fix(cal["reference"])
    return RunConfig.from_dict(data, lines, path)


def load_config(path: str) -> RunConfig:
    with open(path) as f:
        text = f.read()
    return parse_config(text, path)


def event_time(value: Union[str, int], days: int = 1) -> int:
    """Event time from ns or ``"<day> HH:MM[:SS]"`` (day index, default 0)."""
    if isinstance(value, int):
        return value
    s = str(value).strip()
    if " " in s:
        d, clock = s.split(None, 1)
        day = int(d.lstrip("d"))
    else:
        day, clock = 0, s
    if not 0 <= day < days:
        raise ValueError(f"event day {day} outside the calendar")
    return day * NS_PER_DAY + parse_clock(clock)
