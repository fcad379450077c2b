"""Scenario harness, config parsing, and metrics math, exercised over a
small fast line topology so each run finishes in well under a second."""

import copy

import pytest

from ndnswarm import harness, metrics
from ndnswarm.config import ParseError, apply_override, scenario_digest, scenario_from_dict


def raw_scenario():
    return {
        "sim": {"duration_s": 5.0, "seed": 3},
        "torrent": {"name": "/t/x", "file_count": 1, "file_size": 4096, "payload_size": 512},
        "nodes": [
            {"node_id": "a"},
            {"node_id": "b", "role": "router"},
            {"node_id": "c"},
        ],
        "links": [
            {"link_id": "l1", "a": "a", "b": "b", "bandwidth_mbps": 100.0, "prop_delay_ms": 1.0},
            {"link_id": "l2", "a": "b", "b": "c", "bandwidth_mbps": 100.0, "prop_delay_ms": 1.0},
        ],
        "apps": [
            {"node": "c", "kind": "producer"},
            {"node": "a", "kind": "consumer", "start_s": 0.05, "window": 16},
        ],
    }


def tiny_cfg(**sim_extra):
    raw = raw_scenario()
    raw["sim"].update(sim_extra)
    return scenario_from_dict(raw, name="tiny")


# -- metrics ------------------------------------------------------------------


def test_fmt_six_significant_digits():
    assert metrics.fmt(0.123456789) == "0.123457"
    assert metrics.fmt(1234567.0) == "1.23457e+06"
    assert metrics.fmt(float("inf")) == "inf"
    assert metrics.fmt(42) == "42"
    assert metrics.fmt("x") == "x"


def test_percentile_nearest_rank():
    assert metrics.percentile([1.0, 2.0, 3.0, 4.0], 50) == 2.0
    assert metrics.percentile([4.0, 1.0, 3.0, 2.0], 100) == 4.0
    assert metrics.percentile([5.0], 90) == 5.0
    vals = [float(v) for v in range(10, 0, -1)]
    assert metrics.percentile(vals, 90) == sorted(vals)[8]
    with pytest.raises(ValueError):
        metrics.percentile([], 50)
    with pytest.raises(ValueError):
        metrics.percentile([1.0], 0)
    with pytest.raises(ValueError):
        metrics.percentile([1.0], 101)


def test_max_window_speed_sliding():
    s = 1_000_000_000
    arrivals = [(0, 100), (s // 2, 100), (s, 100)]
    # at t=1s the t=0 arrival has aged out, so the best window holds 200 B
    assert metrics.max_window_speed(arrivals) == 200 * 8.0
    assert metrics.max_window_speed([]) == 0.0
    assert metrics.max_window_speed([(0, 100)]) == 800.0


def test_mean_speed_half_open_interval():
    s = 1_000_000_000
    arrivals = [(1 * s, 100), (2 * s, 100), (3 * s, 100)]
    assert metrics.mean_speed(arrivals, 1 * s, 3 * s) == 200 * 8.0 / 2.0
    with pytest.raises(ValueError):
        metrics.mean_speed(arrivals, 3 * s, 3 * s)


def test_rate_series_buckets():
    s = 1_000_000_000
    arrivals = [(s // 2, 100), (2 * s + 1, 50)]
    assert metrics.rate_series(arrivals) == [(0.0, 800.0), (1.0, 0.0), (2.0, 400.0)]
    assert metrics.rate_series([]) == []


def test_majority_origin_window_and_ties():
    s = 1_000_000_000
    arrivals = [(1 * s, 10, "x"), (2 * s, 10, "y"), (3 * s, 10, "y"), (9 * s, 10, "z")]
    assert metrics.majority_origin(arrivals, 0, 4 * s) == "y"
    assert metrics.majority_origin(arrivals, 0, 3 * s) == "x"  # tie: smallest name
    assert metrics.majority_origin(arrivals, 4 * s, 5 * s) is None


def test_first_time_threshold_helpers():
    series = [(0.0, 0.5), (1.0, 0.95), (2.0, 1.0)]
    assert metrics.first_time_at_or_above(series, 0.95) == 1.0
    assert metrics.first_time_above(series, 0.95) == 2.0
    assert metrics.first_time_above(series, 1.0) is None


def test_aggregate_runs_handles_missing_keys():
    runs = [{"a": 1.0, "b": 5.0}, {"a": 3.0}, {"a": 2.0, "b": 7.0}]
    assert metrics.aggregate_runs(runs, 100) == {"a": 3.0, "b": 7.0}
    assert metrics.aggregate_runs([], 50) == {}


# -- config -------------------------------------------------------------------


def test_scenario_from_dict_roundtrip():
    cfg = tiny_cfg()
    assert cfg.sim.seed == 3
    assert cfg.torrent.payload_size == 512
    assert [n.node_id for n in cfg.nodes] == ["a", "b", "c"]
    assert cfg.links[0].bandwidth_bps == 100_000_000
    assert cfg.apps[0].kind == "producer"
    assert cfg.apps[1].window == 16


def test_digest_tracks_config_changes():
    a = tiny_cfg()
    b = tiny_cfg()
    assert scenario_digest(a) == scenario_digest(b)
    c = harness.with_seed(a, 99)
    assert scenario_digest(c) != scenario_digest(a)
    d = harness.with_window(a, 5)
    assert scenario_digest(d) != scenario_digest(a)


@pytest.mark.parametrize(
    "mutate,msg",
    [
        (lambda r: r.__setitem__("bogus", {}), "unknown section"),
        (lambda r: r["sim"].__setitem__("nope", 1), "unknown key"),
        (lambda r: r["sim"].__setitem__("duration_s", "long"), "must be a number"),
        (lambda r: r["sim"].__setitem__("duration_s", 0.0), "duration_s"),
        (lambda r: r["nodes"][0].__setitem__("role", "alien"), "role"),
        (lambda r: r["apps"][0].__setitem__("kind", "mole"), "kind"),
        (lambda r: r["apps"][1].__setitem__("window", 0), "window"),
        (lambda r: r["apps"][1].__setitem__("start_s", -1.0), "start_s"),
        (lambda r: r["apps"][1].__setitem__("node", "zz"), "unknown node"),
        (
            lambda r: r.__setitem__(
                "events", [{"at_s": 1.0, "action": "explode", "node": "a"}]
            ),
            "action",
        ),
        (
            lambda r: r.__setitem__(
                "events", [{"at_s": 1.0, "action": "connect", "node": "zz"}]
            ),
            "unknown node",
        ),
        (lambda r: r["links"][0].__setitem__("bandwidth_mbps", 0), "bandwidth_mbps"),
        (lambda r: r["torrent"].__setitem__("name", "no-slash"), "starting with /"),
        (lambda r: r["torrent"].__setitem__("payload_size", 0), "payload_size"),
        (lambda r: r["torrent"].__setitem__("file_count", 0), "file_count"),
        (lambda r: r.__setitem__("forwarder", {"cs_enabled_roles": "router"}), "array"),
        (lambda r: r.__setitem__("strategy", {"ewma_alpha": 2.0}), "ewma_alpha"),
    ],
)
def test_scenario_validation_errors(mutate, msg):
    raw = raw_scenario()
    mutate(raw)
    with pytest.raises(ParseError, match=msg):
        scenario_from_dict(raw)


def test_apply_override_paths():
    raw = raw_scenario()
    apply_override(raw, "sim.duration_s=30")
    apply_override(raw, "sim.record_events=true")
    apply_override(raw, "links[0].bandwidth_mbps=4")
    apply_override(raw, "torrent.name=/other/name")
    cfg = scenario_from_dict(raw)
    assert cfg.sim.duration_s == 30
    assert cfg.sim.record_events is True
    assert cfg.links[0].bandwidth_bps == 4_000_000
    assert cfg.torrent.name == "/other/name"


@pytest.mark.parametrize(
    "expr,msg",
    [
        ("noequals", "path=value"),
        ("=5", "empty path"),
        ("a..b=1", "empty path"),
        ("links[x].y=1", "bad path element"),
        ("bogus.key=1", "no such key"),
        ("links[9].bandwidth_mbps=4", "out of range"),
        ("links[0]=4", "array element"),
    ],
)
def test_apply_override_errors(expr, msg):
    with pytest.raises(ParseError, match=msg):
        apply_override(raw_scenario(), expr)


def test_override_replacing_section_with_scalar_is_caught():
    raw = raw_scenario()
    apply_override(raw, "sim=5")
    with pytest.raises(ParseError, match="expected a table"):
        scenario_from_dict(raw)


def test_shipped_scenarios_load():
    names = harness.list_scenarios()
    assert {"flash_crowd", "scenario1", "scenario2", "scenario3"} <= set(names)
    from ndnswarm.config import load_scenario

    for name in names:
        cfg = load_scenario(harness.scenario_path(name))
        assert cfg.nodes and cfg.links and cfg.apps
        assert len(scenario_digest(cfg)) == 16


# -- harness ------------------------------------------------------------------


def test_run_scenario_completes_tiny():
    result = harness.run_scenario(tiny_cfg())
    assert result.all_complete
    assert not result.any_aborted
    rep = result.consumer("a")
    assert rep.data_packets == 8
    assert rep.payload_bytes == 4096
    assert rep.completed_s is not None and rep.completed_s < 1.0
    assert rep.provenance == {"c": 8}
    assert rep.max_speed_bps > 0
    assert rep.mean_speed_bps > 0
    with pytest.raises(KeyError):
        result.consumer("nobody")


def test_config_copies_do_not_touch_original():
    cfg = tiny_cfg()
    w = harness.with_window(cfg, 5)
    assert [a.window for a in w.apps if a.kind == "consumer"] == [5]
    assert [a.window for a in cfg.apps if a.kind == "consumer"] == [16]
    assert w.apps[0].kind == "producer"

    s = harness.with_seed(cfg, 42)
    assert s.sim.seed == 42 and cfg.sim.seed == 3

    raw = raw_scenario()
    raw["forwarder"] = {"cs_capacity": 64, "cs_enabled_roles": ["router"]}
    hot = scenario_from_dict(raw)
    cold = harness.with_cache(hot, False)
    assert cold.forwarder.cs_capacity == 0
    assert cold.forwarder.cs_enabled_roles == ()
    assert hot.forwarder.cs_capacity == 64


def test_start_jitter_is_seeded():
    raw = raw_scenario()
    raw["apps"][1]["jitter_s"] = 0.2
    cfg = scenario_from_dict(raw)
    first = harness.run_scenario(cfg).consumer("a")
    again = harness.run_scenario(cfg).consumer("a")
    assert first.started_s == again.started_s
    assert 0.05 <= first.started_s <= 0.25
    assert first.started_s != 0.05  # jitter actually applied


def test_write_reports_byte_identical(tmp_path):
    cfg = tiny_cfg()
    d1, d2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    paths1 = harness.write_reports(harness.run_scenario(cfg), d1)
    paths2 = harness.write_reports(harness.run_scenario(cfg), d2)

    names = [p.rsplit("/", 1)[1] for p in paths1]
    assert names == [
        "meta.csv", "summary.csv", "provenance.csv", "utilization.csv",
        "links.csv", "counters.csv", "rates.csv",
    ]
    for p1, p2 in zip(paths1, paths2):
        with open(p1, "rb") as f1, open(p2, "rb") as f2:
            assert f1.read() == f2.read()


def test_run_percentile_matches_manual_aggregation():
    cfg = tiny_cfg()
    agg = harness.run_percentile(cfg, reps=3, p=100.0)
    manual = [
        harness.run_scenario(harness.with_seed(cfg, cfg.sim.seed + i)).consumer("a")
        for i in range(3)
    ]
    assert agg["completed_s:a"] == max(r.completed_s for r in manual)
    assert agg["max_speed_mbps:a"] == max(r.max_speed_bps for r in manual) / 1e6


def test_cache_comparison_reduces_seeder_load():
    raw = raw_scenario()
    raw["nodes"].append({"node_id": "d"})
    raw["links"].append(
        {"link_id": "l3", "a": "d", "b": "b", "bandwidth_mbps": 100.0, "prop_delay_ms": 1.0}
    )
    raw["apps"].append({"node": "d", "kind": "consumer", "start_s": 1.0, "window": 16})
    raw["forwarder"] = {"cs_capacity": 64, "cs_enabled_roles": ["router"]}
    cfg = scenario_from_dict(raw)

    with_cs, without_cs, ratio = harness.run_cache_comparison(cfg)
    assert with_cs.all_complete and without_cs.all_complete
    hot = harness.seeder_answered(with_cs)
    cold = harness.seeder_answered(without_cs)
    assert ratio == hot / cold
    assert ratio < 1.0
    # the late joiner is served out of the router's store
    late = with_cs.consumer("d").provenance
    assert late.get("cache:b", 0) == 8
    assert without_cs.consumer("d").provenance == {"c": 8}


def test_steady_state_window_fractions():
    lo, hi = harness.steady_state_window(10.0)
    assert (lo, hi) == (6.0, 9.5)


def test_build_network_rejects_doubled_apps():
    raw = raw_scenario()
    raw["apps"].append({"node": "a", "kind": "consumer"})
    cfg = scenario_from_dict(raw)
    with pytest.raises(ValueError, match="two consumers"):
        harness.build_network(cfg)


def test_event_log_interest_counting():
    cfg = tiny_cfg(record_events=True)
    result = harness.run_scenario(cfg)
    net = result.handle.net

    direct = sum(
        1
        for e in net.events
        if e[1] == "send" and e[2] == "l1" and e[3] == "a->b" and e[4] == "Interest"
    )
    counted = metrics.interests_on_link(net, "l1", "a", 0)
    assert counted == direct
    assert counted == 10  # 1 torrent-file + 1 manifest + 8 data segments

    rows = metrics.utilization_rows(net)
    assert rows == sorted(rows, key=lambda r: (r[0], r[1], r[2]))
    assert metrics.mean_utilization(net, "l1", "a->b", 100.0, 200.0) == 0.0

    counters = metrics.counter_rows(net)
    assert len(counters) == 3 * 10  # three nodes, ten counters each
    assert counters[0][0] == "a"


def test_deep_copied_raw_unchanged_by_loading():
    raw = raw_scenario()
    snapshot = copy.deepcopy(raw)
    scenario_from_dict(raw)
    assert raw == snapshot
