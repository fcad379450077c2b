"""Scenario harness: build a configured swarm, run it, report on it.

A scenario config (see config.py) names the topology, the torrent, the
apps with their start times, and any timed connectivity changes. The
harness wires all of it onto a Network, runs the event loop to the
configured horizon, and condenses what happened into per-consumer
reports plus CSV files. Repeated runs with the same seed are
byte-identical; repeated runs across seeds aggregate by percentile.
"""

from __future__ import annotations

import dataclasses
import os
import random
from dataclasses import dataclass

from . import metrics
from .apps import ConsumerApp, ProducerApp, generate_files
from .config import ScenarioConfig, load_scenario, scenario_digest
from .packets import name_from_uri
from .simnet import Network, SECOND, Topology

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "scenarios")


def list_scenarios() -> list[str]:
    out = []
    for fn in sorted(os.listdir(SCENARIO_DIR)):
        if fn.endswith(".toml"):
            out.append(fn[:-5])
    return out


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, name + ".toml")


@dataclass
class RunHandle:
    """Live simulation objects for one scenario run."""

    cfg: ScenarioConfig
    net: Network
    consumers: dict[str, ConsumerApp]
    producers: dict[str, ProducerApp]


def build_network(cfg: ScenarioConfig) -> RunHandle:
    topo = Topology(list(cfg.nodes), list(cfg.links))
    net = Network(
        topo,
        strategy_config=cfg.strategy,
        metrics_interval_ms=cfg.sim.metrics_interval_ms,
        cs_capacity=cfg.forwarder.cs_capacity,
        cs_enabled_roles=cfg.forwarder.cs_enabled_roles,
        record_events=cfg.sim.record_events,
    )
    torrent_name = name_from_uri(cfg.torrent.name)
    files = generate_files(
        cfg.sim.seed, torrent_name, [cfg.torrent.file_size] * cfg.torrent.file_count
    )

    consumers: dict[str, ConsumerApp] = {}
    producers: dict[str, ProducerApp] = {}
    for spec in cfg.apps:
        node = net.nodes[spec.node]
        if spec.kind == "producer":
            if spec.node in producers:
                raise ValueError("two producers on node %r" % spec.node)
            app = ProducerApp(node, torrent_name, files, cfg.torrent.payload_size)
            producers[spec.node] = app
        else:
            if spec.node in consumers:
                raise ValueError("two consumers on node %r" % spec.node)
            app = ConsumerApp(
                node,
                torrent_name,
                cfg.torrent.payload_size,
                window=spec.window,
                lifetime_ms=spec.lifetime_ms,
                retry_limit=spec.retry_limit,
                serve=spec.serve,
                record_stats=spec.record_stats,
                pace_interval_ms=spec.pace_interval_ms,
            )
            consumers[spec.node] = app
        app.app_face = node.add_app_face(app)
        start_s = spec.start_s
        if spec.jitter_s > 0:
            rng = random.Random("%d|%s|start" % (cfg.sim.seed, spec.node))
            start_s += rng.uniform(0.0, spec.jitter_s)
        net.schedule(int(start_s * SECOND), app.start)

    for ev in cfg.events:
        if ev.action == "disconnect":
            fn = lambda t, n=ev.node: net.disconnect_node(n)
        else:
            fn = lambda t, n=ev.node: net.connect_node(n)
        net.schedule(int(ev.at_s * SECOND), fn)

    return RunHandle(cfg, net, consumers, producers)


@dataclass
class ConsumerReport:
    node: str
    window: int
    started_s: float | None
    completed_s: float | None
    aborted: bool
    data_packets: int
    payload_bytes: int
    max_speed_bps: float  # best 1 s sliding window, payload bits
    mean_speed_bps: float  # start to completion (or run end)
    retries: int
    provenance: dict[str, int]  # origin tag -> data packets


@dataclass
class ScenarioResult:
    scenario: str
    seed: int
    digest: str
    duration_s: float
    consumers: list[ConsumerReport]
    handle: RunHandle

    def consumer(self, node: str) -> ConsumerReport:
        for rep in self.consumers:
            if rep.node == node:
                return rep
        raise KeyError(node)

    @property
    def all_complete(self) -> bool:
        return all(r.completed_s is not None for r in self.consumers)

    @property
    def any_aborted(self) -> bool:
        return any(r.aborted for r in self.consumers)


def _consumer_report(node_id: str, app: ConsumerApp, end_ns: int) -> ConsumerReport:
    started = app.started_ns
    completed = app.completed_ns
    span_end = completed if completed is not None else end_ns
    mean = 0.0
    if started is not None and span_end > started:
        mean = metrics.mean_speed(app.arrivals, started, span_end)
    return ConsumerReport(
        node=node_id,
        window=app.window,
        started_s=None if started is None else started / SECOND,
        completed_s=None if completed is None else completed / SECOND,
        aborted=app.aborted,
        data_packets=len(app.arrivals),
        payload_bytes=sum(row[1] for row in app.arrivals),
        max_speed_bps=metrics.max_window_speed(app.arrivals),
        mean_speed_bps=mean,
        retries=app.retries_issued,
        provenance=dict(app.provenance),
    )


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    handle = build_network(cfg)
    end_ns = int(cfg.sim.duration_s * SECOND)
    handle.net.run_until(end_ns)
    reports = [
        _consumer_report(node_id, app, end_ns)
        for node_id, app in sorted(handle.consumers.items())
    ]
    return ScenarioResult(
        scenario=cfg.name,
        seed=cfg.sim.seed,
        digest=scenario_digest(cfg),
        duration_s=cfg.sim.duration_s,
        consumers=reports,
        handle=handle,
    )


def with_window(cfg: ScenarioConfig, window: int) -> ScenarioConfig:
    """Copy of cfg with every consumer's in-flight window replaced."""
    apps = [
        dataclasses.replace(a, window=window) if a.kind == "consumer" else a
        for a in cfg.apps
    ]
    return dataclasses.replace(cfg, apps=apps)


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=seed))


def sweep_windows(cfg: ScenarioConfig, windows: list[int]) -> list[ScenarioResult]:
    return [run_scenario(with_window(cfg, w)) for w in windows]


def with_cache(cfg: ScenarioConfig, enabled: bool) -> ScenarioConfig:
    fwd = cfg.forwarder
    if not enabled:
        fwd = dataclasses.replace(fwd, cs_capacity=0, cs_enabled_roles=())
    return dataclasses.replace(cfg, forwarder=fwd)


def seeder_answered(result: ScenarioResult) -> int:
    return sum(p.interests_answered for p in result.handle.producers.values())


def run_cache_comparison(cfg: ScenarioConfig) -> tuple[ScenarioResult, ScenarioResult, float]:
    """Run cfg with its content stores on, then off; returns both results
    and the ratio of seeder-answered Interests (cached / uncached)."""
    with_cs = run_scenario(cfg)
    without_cs = run_scenario(with_cache(cfg, False))
    hot = seeder_answered(with_cs)
    cold = seeder_answered(without_cs)
    ratio = hot / cold if cold else float("inf")
    return with_cs, without_cs, ratio


def steady_state_window(completed_s: float) -> tuple[float, float]:
    """The span used for steady-state link readings: clear of the ramp at
    the front and of the final in-flight drain at the back."""
    return 0.6 * completed_s, 0.95 * completed_s


# -- report files -----------------------------------------------------------


def write_reports(result: ScenarioResult, out_dir: str) -> list[str]:
    """Write the CSV report set; returns the paths written."""
    net = result.handle.net
    paths = []

    def emit(fname: str, header: list[str], rows):
        path = os.path.join(out_dir, fname)
        metrics.write_csv(path, header, rows)
        paths.append(path)

    emit(
        "meta.csv",
        ["scenario", "seed", "digest", "duration_s"],
        [(result.scenario, result.seed, result.digest, result.duration_s)],
    )

    emit(
        "summary.csv",
        [
            "consumer", "window", "started_s", "completed_s", "aborted",
            "data_packets", "payload_bytes", "max_speed_mbps",
            "mean_speed_mbps", "retries",
        ],
        [
            (
                r.node,
                r.window,
                "" if r.started_s is None else r.started_s,
                "" if r.completed_s is None else r.completed_s,
                int(r.aborted),
                r.data_packets,
                r.payload_bytes,
                r.max_speed_bps / 1e6,
                r.mean_speed_bps / 1e6,
                r.retries,
            )
            for r in result.consumers
        ],
    )

    emit(
        "provenance.csv",
        ["consumer", "origin", "packets", "fraction"],
        metrics.provenance_rows({r.node: r.provenance for r in result.consumers}),
    )

    emit(
        "utilization.csv",
        ["time_s", "link_id", "direction", "utilization"],
        metrics.utilization_rows(net),
    )

    link_rows = []
    for link_id in sorted(net.links):
        link = net.links[link_id]
        for sender in sorted(link.dirs):
            d = link.dirs[sender]
            link_rows.append(
                (link_id, d.key, d.delivered_packets, d.delivered_bytes, d.drops)
            )
    emit(
        "links.csv",
        ["link_id", "direction", "delivered_packets", "delivered_bytes", "drops"],
        link_rows,
    )

    emit("counters.csv", ["node", "counter", "value"], metrics.counter_rows(net))

    rate_rows = []
    for r in result.consumers:
        app = result.handle.consumers[r.node]
        for t_s, bps in metrics.rate_series(app.arrivals):
            rate_rows.append((r.node, t_s, bps / 1e6))
    emit("rates.csv", ["consumer", "time_s", "mbps"], rate_rows)

    return paths


def run_percentile(cfg: ScenarioConfig, reps: int, p: float) -> dict:
    """Repeat the scenario over consecutive seeds; per-consumer completion
    time and max speed reported at the given percentile."""
    runs = []
    for i in range(reps):
        result = run_scenario(with_seed(cfg, cfg.sim.seed + i))
        row = {}
        for r in result.consumers:
            if r.completed_s is not None:
                row["completed_s:%s" % r.node] = r.completed_s
            row["max_speed_mbps:%s" % r.node] = r.max_speed_bps / 1e6
        runs.append(row)
    return metrics.aggregate_runs(runs, p)
