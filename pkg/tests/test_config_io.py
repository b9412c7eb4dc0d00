import pytest
from hypothesis import given, settings, strategies as st

from evosim import io
from evosim.book import LobSnapshot, Order, OrderType, ORIGIN_REPLAY, Side, TradeRecord
from evosim.config import ConfigError, RunConfig, event_time, load_config, parse_config
from evosim.exchange.calendar import NS_PER_DAY, parse_clock

CONFIG = """\
seed: 3
days: ["2024-01-02", "2024-01-03"]
assets:
  - {asset: 0, p_ref: 1000, eta: 0.1}
  - {asset: 1, p_ref: 2000}
agents:
  - {type: zi, count: 4, seed: 1, params: {rate: 0.5}}
workers: 4
async_commit: true
snapshot_cadence_s: 30
"""


def test_parse_and_defaults():
    cfg = parse_config(CONFIG)
    assert cfg.seed == 3 and cfg.workers == 4 and cfg.async_commit
    assert [a.p_ref for a in cfg.assets] == [1000, 2000]
    assert cfg.assets[1].eta == 0.10 and cfg.assets[1].lot_size == 100
    assert cfg.calibration.L == 10 and not cfg.calibration.enabled


def test_round_trip_is_identity():
    cfg = parse_config(CONFIG)
    again = parse_config(cfg.dump())
    assert again == cfg and again.digest() == cfg.digest()


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31), st.integers(0, 32), st.booleans(), st.sampled_from([1.0, 3.0, 30.0]),
       st.integers(1, 10))
def test_round_trip_property(seed, workers, asyn, cadence, levels):
    cfg = RunConfig(seed=seed, workers=workers, async_commit=asyn, snapshot_cadence_s=cadence,
                    snapshot_levels=max(levels, 10))
    assert parse_config(cfg.dump()) == cfg


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as e:
        parse_config(CONFIG + "wrokers: 2\n", "c.yaml")
    assert e.value.line == 11 and "wrokers" in str(e.value) and "c.yaml:11" in str(e.value)


def test_bad_value_reports_line():
    text = CONFIG.replace("workers: 4", "workers: -1")
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.line == 8


def test_invalid_yaml_reports_line():
    with pytest.raises(ConfigError) as e:
        parse_config("seed: 1\nassets: [\n  {asset: 0\n")
    assert e.value.line is not None


def test_missing_reference_file_named(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(CONFIG + "calibration: {enabled: true, reference: nowhere.csv}\n")
    with pytest.raises(ConfigError) as e:
        load_config(str(p))
    assert str(tmp_path / "nowhere.csv") in str(e.value)


def test_relative_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "trace.csv").write_text(io.TRACE_HEADER)
    p = tmp_path / "c.yaml"
    p.write_text(CONFIG + "replay: trace.csv\n")
    assert load_config(str(p)).replay == str(tmp_path / "trace.csv")


def test_event_time_forms():
    assert event_time(123) == 123
    assert event_time("10:00") == parse_clock("10:00")
    assert event_time("d1 10:00:30", 2) == NS_PER_DAY + parse_clock("10:00:30")
    with pytest.raises(ValueError):
        event_time("d3 10:00", 2)


# -- delimited formats ----------------------------------------------------------

def test_snapshot_log_round_trip(tmp_path):
    snaps = [LobSnapshot.from_sides([(999, 5), (998, 1)], [(1001, 2)], 3, t, a) for t in (5, 9) for a in (0, 1)]
    path = tmp_path / "s.csv"
    with open(path, "w") as f:
        f.write(io.snapshot_header(3))
        for s in snaps:
            f.write(io.snapshot_line(s))
    assert io.read_snapshot_log(str(path)) == snaps


def test_trace_round_trip():
    orders = [Order(1, 0, Side.BUY, OrderType.LIMIT, 999, 5, 10, ORIGIN_REPLAY),
              Order(2, 0, Side.SELL, OrderType.MARKET, 0, 3, 11, ORIGIN_REPLAY),
              Order(3, 0, Side.BUY, OrderType.CANCEL, 0, 0, 12, ORIGIN_REPLAY, 1)]
    rows = [io.TRACE_HEADER.strip().split(",")] + [io.trace_line(io.trace_row(o, o.recv_time)).strip().split(",")
                                                  for o in orders]
    back = io.parse_order_rows(rows)
    assert [(o.id, o.side, o.order_type, o.price, o.volume, o.recv_time, o.ref_id) for o in back] == \
           [(o.id, o.side, o.order_type, o.price, o.volume, o.recv_time, o.ref_id) for o in orders]


HEAD = io.TRACE_HEADER.strip().split(",")


@pytest.mark.parametrize("rows,line", [
    ([["5", "0", "B", "L", "999", "1", "1", "-1"], ["4", "0", "B", "L", "999", "1", "2", "-1"]], 3),
    ([["5", "0", "B", "L", "999", "1", "1", "-1"], ["6", "0", "B", "L", "999", "1", "1", "-1"]], 3),
    ([["5", "0", "B", "C", "0", "0", "1", "7"]], 2),
    ([["5", "0", "X", "L", "999", "1", "1", "-1"]], 2),
    ([["5", "0", "B", "L", "abc", "1", "1", "-1"]], 2),
    ([["5", "0", "B", "L", "999", "1"]], 2),
])
def test_malformed_trace_rows_name_the_line(rows, line):
    with pytest.raises(io.FormatError) as e:
        io.parse_order_rows([HEAD] + rows, "t.csv")
    assert e.value.line == line and f"t.csv:{line}" in str(e.value)


def test_trade_line_format():
    t = TradeRecord(1, 0, 1000, 5, 7, 3, 99)
    assert io.trade_line(t) == "1,0,99,1000,5,7,3\n"
