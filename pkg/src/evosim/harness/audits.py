"""Post-run checks of band, session and T+1 contracts."""
from __future__ import annotations

from collections import defaultdict
from typing import Dict, List

from ..exchange.calendar import Phase, SessionCalendar
from ..sim import RunResult


def band_violations(r: RunResult, calendar: SessionCalendar) -> List[str]:
    """Every accepted agent limit and every trade lies inside its day's band."""
    bands = {}
    for day, asset, b in r.bands:
        bands[(day, asset)] = b
    out = []
    for t, asset, side, kind, price, vol, oid, ref in r.trace:
        if kind != "L":
            continue
        b = bands[(calendar.day_at(t), asset)]
        if not b.contains(price):
            out.append(f"order {oid} at {price} outside [{b.p_min}, {b.p_max}]")
    for tr in r.trades:
        b = bands[(calendar.day_at(tr.time), tr.asset)]
        if not b.contains(tr.price):
            out.append(f"trade {tr.trade_id} at {tr.price} outside [{b.p_min}, {b.p_max}]")
    return out


def session_violations(r: RunResult, calendar: SessionCalendar) -> List[str]:
    """Orders only in tradable phases; trades only in continuous trading (auction prints at the open)."""
    out = []
    for t, asset, side, kind, price, vol, oid, ref in r.trace:
        ph = calendar.phase_at(t)
        if ph not in (Phase.CONTINUOUS, Phase.PREOPEN_AUCTION):
            out.append(f"order {oid} accepted during {ph.value}")
        elif ph is Phase.PREOPEN_AUCTION and kind == "M":
            out.append(f"market order {oid} accepted during the auction window")
    for tr in r.trades:
        if calendar.phase_at(tr.time) is not Phase.CONTINUOUS:
            out.append(f"trade {tr.trade_id} during {calendar.phase_at(tr.time).value}")
    return out


def t1_violations(r: RunResult) -> List[str]:
    """Sales never exceed the day-open available position, and the next day's
    availability equals the open position minus sales plus settled buys."""
    out = []
    days = sorted(r.day_open_avail)
    flows: Dict[int, Dict[tuple, list]] = {}
    for day, rows in r.settlements:
        f = flows.setdefault(day, defaultdict(lambda: [0, 0]))
        for row in rows:
            f[(row.agent, row.asset)][0] += row.bought
            f[(row.agent, row.asset)][1] += row.sold
    for d in days:
        opened = r.day_open_avail[d]
        f = flows.get(d, {})
        for (agent, asset), (bought, sold) in f.items():
            if not agent.startswith("agent:"):
                continue
            avail = opened.get(agent, {}).get(asset, 0)
            if sold > avail:
                out.append(f"day {d} {agent} asset {asset}: sold {sold} > open available {avail}")
        if d + 1 in r.day_open_avail:
            nxt = r.day_open_avail[d + 1]
            for agent, hold in opened.items():
                if not agent.startswith("agent:"):
                    continue
                for asset in set(hold) | set(nxt.get(agent, {})):
                    bought, sold = f.get((agent, asset), (0, 0))
                    want = hold.get(asset, 0) - sold + bought
                    got = nxt.get(agent, {}).get(asset, 0)
                    if want != got:
                        out.append(f"day {d + 1} {agent} asset {asset}: available {got}, expected {want}")
    return out


def mechanism_audit(r: RunResult, calendar: SessionCalendar) -> Dict[str, List[str]]:
    return {"band": band_violations(r, calendar), "session": session_violations(r, calendar),
            "t1": t1_violations(r)}
