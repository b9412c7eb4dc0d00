"""Price limits and T+1 portfolio accounting."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional


def round_half_away(x: Fraction) -> int:
    if x >= 0:
        return int((x + Fraction(1, 2)) // 1)
    return -int((-x + Fraction(1, 2)) // 1)


@dataclass(frozen=True)
class PriceBand:
    p_ref: int
    eta: float
    p_min: int
    p_max: int

    @classmethod
    def from_ref(cls, p_ref: int, eta: float) -> "PriceBand":
        if not 0 <= eta < 1:
            raise ValueError("limit ratio must be in [0, 1)")
        e = Fraction(str(eta))
        lo = round_half_away((1 - e) * p_ref)
        hi = round_half_away((1 + e) * p_ref)
        return cls(p_ref, eta, max(lo, 1), hi)

    def contains(self, price: int) -> bool:
        return self.p_min <= price <= self.p_max


@dataclass
class PortfolioState:
    """Cash in cents and holdings in lots, split into sellable and pending.

    ``h_locked`` is sellable inventory already committed to resting sells and
    ``cash_reserved`` backs resting buys; both return to the free pools on
    cancel or expiry.
    """

    cash: int = 0
    h_avail: Dict[int, int] = field(default_factory=dict)
    h_pend: Dict[int, int] = field(default_factory=dict)
    h_locked: Dict[int, int] = field(default_factory=dict)
    cash_reserved: int = 0

    def holdings(self, asset: int) -> int:
        return self.h_avail.get(asset, 0) + self.h_pend.get(asset, 0) + self.h_locked.get(asset, 0)

    def copy(self) -> "PortfolioState":
        return PortfolioState(self.cash, dict(self.h_avail), dict(self.h_pend),
                              dict(self.h_locked), self.cash_reserved)

    def check(self) -> List[str]:
        bad = []
        if self.cash < 0 or self.cash_reserved < 0:
            bad.append("negative cash")
        for name in ("h_avail", "h_pend", "h_locked"):
            if any(v < 0 for v in getattr(self, name).values()):
                bad.append(f"negative {name}")
        return bad


@dataclass
class SettlementRow:
    agent: str
    asset: int
    bought: int = 0
    sold: int = 0
    pend_released: int = 0
    cash_delta: int = 0


class Ledger:
    """Portfolios keyed by account name; sinks are unconstrained accounts.

    Agents are named ``agent:<id>``; replay, calibration and intervention flow
    book against sink accounts that may go negative.
    """

    def __init__(self, lot_sizes: Dict[int, int]):
        self.lot_sizes = lot_sizes
        self.accounts: Dict[str, PortfolioState] = {}
        self.sinks: Dict[str, PortfolioState] = {}
        self.day_flows: Dict[tuple, SettlementRow] = {}
        self.day_cash0: Dict[str, int] = {}

    def account(self, name: str) -> PortfolioState:
        acct = self.accounts.get(name)
        if acct is None:
            acct = self.sinks.get(name)
            if acct is None:
                acct = self.sinks[name] = PortfolioState()
        return acct

    def open_account(self, name: str, cash: int, holdings: Optional[Dict[int, int]] = None) -> PortfolioState:
        acct = PortfolioState(cash=cash, h_avail=dict(holdings or {}))
        self.accounts[name] = acct
        return acct

    def is_sink(self, name: str) -> bool:
        return name not in self.accounts

    def value(self, asset: int, price: int, volume: int) -> int:
        return price * volume * self.lot_sizes.get(asset, 1)

    # reservations -----------------------------------------------------
    def reserve_buy(self, name: str, asset: int, price: int, volume: int) -> bool:
        acct = self.account(name)
        if self.is_sink(name):
            return True
        need = self.value(asset, price, volume)
        if need > acct.cash:
            return False
        acct.cash -= need
        acct.cash_reserved += need
        return True

    def reserve_sell(self, name: str, asset: int, volume: int) -> bool:
        acct = self.account(name)
        if self.is_sink(name):
            return True
        if volume > acct.h_avail.get(asset, 0):
            return False
        acct.h_avail[asset] -= volume
        acct.h_locked[asset] = acct.h_locked.get(asset, 0) + volume
        return True

    def release_buy(self, name: str, asset: int, reserve_price: int, volume: int) -> None:
        if volume <= 0 or self.is_sink(name):
            return
        acct = self.accounts[name]
        amt = self.value(asset, reserve_price, volume)
        acct.cash_reserved -= amt
        acct.cash += amt

    def release_sell(self, name: str, asset: int, volume: int) -> None:
        if volume <= 0 or self.is_sink(name):
            return
        acct = self.accounts[name]
        acct.h_locked[asset] -= volume
        acct.h_avail[asset] = acct.h_avail.get(asset, 0) + volume

    # fills ---------------------------------------------------------------
    def _flow(self, name: str, asset: int) -> SettlementRow:
        key = (name, asset)
        row = self.day_flows.get(key)
        if row is None:
            row = self.day_flows[key] = SettlementRow(name, asset)
        return row

    def fill_buy(self, name: str, asset: int, reserve_price: int, price: int, volume: int) -> None:
        acct = self.account(name)
        cost = self.value(asset, price, volume)
        if self.is_sink(name):
            acct.cash -= cost
            acct.h_avail[asset] = acct.h_avail.get(asset, 0) + volume
        else:
            held = self.value(asset, reserve_price, volume)
            acct.cash_reserved -= held
            acct.cash += held - cost
            acct.h_pend[asset] = acct.h_pend.get(asset, 0) + volume
        row = self._flow(name, asset)
        row.bought += volume
        row.cash_delta -= cost

    def fill_sell(self, name: str, asset: int, price: int, volume: int) -> None:
        acct = self.account(name)
        proceeds = self.value(asset, price, volume)
        acct.cash += proceeds
        if self.is_sink(name):
            acct.h_avail[asset] = acct.h_avail.get(asset, 0) - volume
        else:
            acct.h_locked[asset] -= volume
        row = self._flow(name, asset)
        row.sold += volume
        row.cash_delta += proceeds

    # end of day ------------------------------------------------------------
    def settle(self) -> List[SettlementRow]:
        """Release pending lots into sellable inventory; returns the day's rows."""
        for name, acct in self.accounts.items():
            for asset, pend in acct.h_pend.items():
                if pend:
                    acct.h_avail[asset] = acct.h_avail.get(asset, 0) + pend
                    self._flow(name, asset).pend_released += pend
            acct.h_pend = {a: 0 for a in acct.h_pend}
        rows = sorted(self.day_flows.values(), key=lambda r: (r.agent, r.asset))
        self.day_flows = {}
        return rows

    def total_cash(self) -> int:
        return sum(a.cash + a.cash_reserved for a in self.accounts.values()) + sum(
            s.cash for s in self.sinks.values())
