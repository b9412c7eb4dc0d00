import dataclasses
import math

import numpy as np
import pytest

from evosim.book import LobSnapshot
from evosim.config import InterventionSpec, RunConfig
from evosim.exchange.calendar import parse_clock
from evosim.exchange.exchange import AssetSpec
from evosim.harness.audits import mechanism_audit
from evosim.harness.correlation import (MIN_BUCKETS, bucket_mids, cross_asset_correlation, paired_signflip_test,
                                        pearson)
from evosim.harness.event_study import event_study
from evosim.harness.replay import mid_alignment, mid_series
from evosim.harness.stress import RunReport, peak_rss_bytes, scaling_shape, stress_config, stress_throughput
from evosim.sim import build_calendar, run

S = 10 ** 9


def walk_snaps(paths, step_ns=S, t0=parse_clock("09:30")):
    """Snapshots whose mids follow the given integer paths (one per asset)."""
    out = []
    for a, path in enumerate(paths):
        for k, m in enumerate(path):
            out.append(LobSnapshot.from_sides([(int(m), 5)], [(int(m) + 2, 5)], 3, t0 + k * step_ns, a))
    return out


def random_paths(seed, n_assets, n, start=1000):
    rng = np.random.default_rng(seed)
    return [start + np.cumsum(rng.integers(-3, 4, n)) for _ in range(n_assets)]


# -- correlation ---------------------------------------------------------

def test_duplicate_asset_correlates_perfectly():
    p = random_paths(0, 1, 200)[0]
    res = cross_asset_correlation(walk_snaps([p, p]), bucket_s=1)
    assert res.matrix[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_independent_walks_weakly_correlated():
    res = cross_asset_correlation(walk_snaps(random_paths(1, 2, 2000)), bucket_s=1)
    assert abs(res.matrix[0, 1]) < 0.2


def test_matrix_matches_two_pass_pearson():
    res = cross_asset_correlation(walk_snaps(random_paths(2, 5, 300)), bucket_s=1)
    c = res.matrix
    assert np.allclose(c, c.T) and np.all(np.diag(c) == 1.0)
    r = res.returns
    for i in range(5):
        for j in range(5):
            x, y = r[:, i], r[:, j]
            mx, my = sum(x) / len(x), sum(y) / len(y)
            num = sum((a - mx) * (b - my) for a, b in zip(x, y))
            den = math.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y))
            assert abs(c[i, j] - num / den) < 1e-12


def test_zero_variance_asset_is_flagged():
    paths = random_paths(3, 2, 100) + [np.full(100, 1000)]
    res = cross_asset_correlation(walk_snaps(paths), bucket_s=1)
    assert res.flagged == [2]
    assert np.isnan(res.matrix[2]).all() and not np.isnan(res.matrix[:2, :2]).any()


def test_too_few_buckets_raises():
    with pytest.raises(ValueError):
        cross_asset_correlation(walk_snaps(random_paths(4, 2, MIN_BUCKETS)), bucket_s=1)


def test_bucketing_forward_fills_and_drops_leading_gap():
    t0 = parse_clock("09:30")
    snaps = [LobSnapshot.from_sides([(999, 1)], [(1001, 1)], 1, t0 + 5 * S, 0),
             LobSnapshot.from_sides([(999, 1)], [(1003, 1)], 1, t0 + 1 * S, 1),
             LobSnapshot.from_sides([(995, 1)], [(997, 1)], 1, t0 + 7 * S, 1)]
    m = bucket_mids(snaps, [0, 1], S)
    assert m.tolist() == [[1000.0, 1001.0], [1000.0, 996.0]]


def test_pearson_clips_to_unit_interval():
    r = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0 + 1e-15]])
    c, flat = pearson(r)
    assert flat == [] and np.all(np.abs(c) <= 1.0)


def test_signflip_exact():
    assert paired_signflip_test([1.0] * 10) == 1 / 1024
    assert paired_signflip_test([-1.0] * 10) == 1.0
    assert 0.3 < paired_signflip_test([1, -1, 1, -1, 1, -1, 1, -1, 0.5, -0.5]) < 1.0


# -- replay alignment ----------------------------------------------------

def test_mid_alignment_of_identical_series_is_zero():
    snaps = walk_snaps(random_paths(5, 1, 50))
    got = mid_alignment(snaps, snaps, 0, 0.01)
    assert got["n"] == 50 and got["mse"] == 0 and got["mae"] == 0


def test_mid_alignment_constant_offset():
    a = walk_snaps([np.full(10, 1000)])
    b = walk_snaps([np.full(10, 1003)])
    got = mid_alignment(a, b, 0, 0.01)
    assert got["mae"] == pytest.approx(0.03) and got["mse"] == pytest.approx(0.0009)


def test_mid_series_one_sided_is_nan():
    s = [LobSnapshot.from_sides([(999, 1)], [], 1, 3, 0)]
    t, m = mid_series(s, 0)
    assert t.tolist() == [3] and np.isnan(m[0])


# -- event study ----------------------------------------------------------

def es_cfg(**kw):
    agents = [{"type": "quote", "count": 1, "seed": 1,
               "params": {"levels": 5, "size": 10, "jitter": 1, "cash": 10 ** 10, "holdings": 10 ** 4}},
              {"type": "zi", "count": 6, "seed": 2, "params": {"rate": 0.5, "cash": 10 ** 8, "holdings": 100}}]
    base = dict(seed=5, assets=[AssetSpec(0, 1000)], stop_at="09:33", agents=agents)
    base.update(kw)
    return RunConfig(**base)


def test_zero_magnitude_reproduces_baseline_exactly():
    res = event_study(es_cfg(), InterventionSpec(0, 1, "09:31", 0), repeats=2, sigma0_sq=0.0, alpha=0.0)
    assert res.prefix_identical
    for d in (1, -1):
        for m in res.runs[d]:
            assert np.array_equal(m, res.baseline, equal_nan=True)


def test_event_study_signs_and_prefix():
    res = event_study(es_cfg(), InterventionSpec(0, 1, "09:31", 150), repeats=2, sigma0_sq=0.0, alpha=0.0)
    assert res.prefix_identical
    assert res.first_window_delta(1) > 0 > res.first_window_delta(-1)
    assert res.offsets_ns[0] >= 0
    rows = res.rows()
    assert rows[0].startswith("offset_ns,baseline") and len(rows) == len(res.offsets_ns) + 1


def test_event_outside_continuous_rejected():
    with pytest.raises(ValueError):
        event_study(es_cfg(), InterventionSpec(0, 1, "09:20", 5), repeats=1)


# -- stress ---------------------------------------------------------------

def test_rate_doubling_doubles_emitted_orders():
    a = stress_throughput(100, 2)
    b = stress_throughput(200, 2)
    assert a.emitted_orders == 200 and b.emitted_orders == 400
    assert a.processed_orders == a.emitted_orders - a.rejected_orders


def test_zero_rate_has_no_trades():
    r = run(stress_config(0, 2, 1, record_trades=True))
    assert r.trades == [] and r.processed_orders == 0


def test_stress_report_text():
    r = stress_throughput(50, 1)
    txt = r.to_text()
    assert "throughput=" in txt and f"processed_orders={r.processed_orders}" in txt


def test_isolated_peak_memory_excludes_parent():
    ballast = np.ones(25_000_000)  # ~200 MB resident in this process only
    rep = stress_throughput(10, 1, isolate=True)
    assert 0 < rep.peak_memory_bytes < peak_rss_bytes() - 150 * 2 ** 20
    del ballast


def _rep(wall, mem):
    return RunReport("x", 1, 1, 0, wall, mem, 0)


def test_scaling_shape_accepts_ideal_curve():
    counts = [1, 2, 4, 8, 16]
    reps = [_rep(w, m) for w, m in zip([1.0, 1.05, 1.1, 2.2, 4.3], [10, 11, 12, 13, 14])]
    s = scaling_shape(reps, counts, workers=4)
    assert s["flat"] and s["linear"] and s["memory_monotone"]


def test_scaling_shape_rejects_linear_inside_budget():
    counts = [1, 2, 4, 8]
    reps = [_rep(w, m) for w, m in zip([1.0, 2.0, 4.0, 8.0], [10, 11, 12, 12])]
    s = scaling_shape(reps, counts, workers=4)
    assert not s["flat"] and s["linear"] and not s["memory_monotone"]


# -- mechanism audits -----------------------------------------------------

def test_audit_catches_band_breach():
    cfg = es_cfg(stop_at="09:31")
    r = run(cfg)
    assert all(v == [] for v in mechanism_audit(r, build_calendar(cfg)).values())
    p_max = r.bands[0][2].p_max
    forged = dataclasses.replace(r, trace=r.trace + [(parse_clock("09:30:30"), 0, "B", "L", p_max + 1, 1, 10 ** 6,
                                                      -1)])
    assert mechanism_audit(forged, build_calendar(cfg))["band"]


def test_ablation_checks_use_paired_rounds():
    from evosim.harness.ablation import AblationTable

    def rnd(walls, logs=(100, 100, 100, 10, 8)):
        return {n: RunReport(n, 1000, 1000, 0, w, 0, s) for n, w, s in zip(("C0", "C1", "C2", "C3", "C4"), walls, logs)}

    # a slow round makes C4's best time worse, but within each round it keeps pace with C3
    rounds = [rnd([2.0, 1.5, 1.2, 1.2, 1.2]), rnd([2.0, 1.5, 1.2, 1.0, 1.0]), rnd([4.0, 3.0, 2.4, 2.4, 2.4])]
    best = {n: min((r[n] for r in rounds), key=lambda x: x.wall_clock_s) for n in rounds[0]}
    tab = AblationTable(best, rounds)
    assert tab.speedup("C4", "C3") == 1.0 and tab.cadence_ratio() == 10.0
    assert all(tab.checks().values())
    rounds[1]["C4"] = RunReport("C4", 1000, 1000, 0, 1.5, 0, 8)
    rounds[2]["C4"] = RunReport("C4", 1000, 1000, 0, 3.0, 0, 8)
    assert not AblationTable(best, rounds).checks()["main_log_not_slower"]
