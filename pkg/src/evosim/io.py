"""Delimited file formats for snapshots, trades, order traces and reports."""
from __future__ import annotations

import csv
from typing import Dict, Iterable, List, Optional, Sequence, TextIO

from .book import LobSnapshot, Order, OrderType, ORIGIN_REPLAY, Side, TradeRecord

TRADE_HEADER = "trade_id,asset,time_ns,price_ticks,volume_lots,aggressor_id,resting_id\n"
TRACE_HEADER = "time_ns,asset,side,type,price_ticks,volume_lots,order_id,ref_id\n"
COVERAGE_HEADER = "time,agent_type,side,price_ticks,mid_ticks,size_lots\n"
SETTLEMENT_HEADER = "day,agent,asset,bought,sold,pend_released,cash_delta\n"
CALIBRATION_HEADER = "time_ns,asset,pre_gap_norm,post_gap_norm,orders_used,lots_used,residual_flag\n"
MAIN_HEADER = "time_ns,asset,phase,best_bid,best_ask,trades,volume,accepted,rejected\n"

_TYPE_CODE = {OrderType.LIMIT: "L", OrderType.MARKET: "M", OrderType.CANCEL: "C"}
_CODE_TYPE = {v: k for k, v in _TYPE_CODE.items()}


class FormatError(ValueError):
    def __init__(self, message: str, line: int, path: str = ""):
        self.line = line
        super().__init__(f"{path or '<input>'}:{line}: {message}")


def snapshot_header(l: int) -> str:
    cols = ["asset", "time_ns"]
    for i in range(1, l + 1):
        cols += [f"bp{i}", f"bv{i}", f"ap{i}", f"av{i}"]
    return ",".join(cols) + "\n"


def snapshot_line(s: LobSnapshot) -> str:
    return f"{s.asset},{s.timestamp}," + ",".join(map(str, s.flat())) + "\n"


def trade_line(t: TradeRecord) -> str:
    return f"{t.trade_id},{t.asset},{t.time},{t.price},{t.volume},{t.aggressor_id},{t.resting_id}\n"


def trace_row(o: Order, time: int) -> tuple:
    side = "B" if o.side is Side.BUY else "S"
    if o.order_type is OrderType.CANCEL:
        return (time, o.asset, side, "C", 0, 0, o.id, o.ref_id)
    return (time, o.asset, side, _TYPE_CODE[o.order_type], o.price, o.volume, o.id, -1)


def trace_line(row: tuple) -> str:
    return ",".join(map(str, row)) + "\n"


def read_snapshot_log(path: str) -> List[LobSnapshot]:
    out = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header is None:
            return out
        width = len(header)
        if width < 6 or (width - 2) % 4:
            raise FormatError("snapshot header must have 2 + 4l columns", 1, path)
        for n, row in enumerate(r, start=2):
            if len(row) != width:
                raise FormatError(f"expected {width} columns, got {len(row)}", n, path)
            try:
                vals = [int(x) for x in row]
            except ValueError:
                raise FormatError("non-integer field", n, path) from None
            out.append(LobSnapshot.from_flat(vals[2:], vals[1], vals[0]))
    return out


def read_order_trace(path: str) -> List[Order]:
    """Replay rows; validates schema, time order, id uniqueness and cancel targets."""
    with open(path, newline="") as f:
        return parse_order_rows(csv.reader(f), path)


def parse_order_rows(rows: Iterable[Sequence[str]], path: str = "") -> List[Order]:
    out: List[Order] = []
    seen = set()
    last_t = None
    it = iter(rows)
    header = next(it, None)
    if header is None:
        return out
    if [h.strip() for h in header] != TRACE_HEADER.strip().split(","):
        raise FormatError("bad header for order trace", 1, path)
    for n, row in enumerate(it, start=2):
        if not row:
            continue
        if len(row) != 8:
            raise FormatError(f"expected 8 columns, got {len(row)}", n, path)
        try:
            t, asset, side, kind, price, vol, oid, ref = row
            t, asset, price, vol, oid, ref = int(t), int(asset), int(price), int(vol), int(oid), int(ref)
        except ValueError:
            raise FormatError("non-integer field", n, path) from None
        if side not in ("B", "S") or kind not in _CODE_TYPE:
            raise FormatError(f"bad side/type {side!r}/{kind!r}", n, path)
        if last_t is not None and t < last_t:
            raise FormatError(f"timestamp {t} earlier than previous {last_t}", n, path)
        last_t = t
        if oid in seen or oid < 0:
            raise FormatError(f"duplicate or negative order id {oid}", n, path)
        seen.add(oid)
        otype = _CODE_TYPE[kind]
        if otype is OrderType.CANCEL and ref not in seen:
            raise FormatError(f"cancel references unknown id {ref}", n, path)
        o = Order(oid, asset, Side.BUY if side == "B" else Side.SELL, otype, price, vol, t, ORIGIN_REPLAY,
                  ref if otype is OrderType.CANCEL else -1)
        err = o.validate()
        if err:
            raise FormatError(err, n, path)
        out.append(o)
    return out


def write_lines(f: Optional[TextIO], lines: Iterable[str]) -> int:
    n = 0
    for line in lines:
        n += len(line)
        if f is not None:
            f.write(line)
    return n


def read_csv_dicts(path: str) -> List[Dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
