"""Run outputs: delimited tables, percentiles, download-speed extraction.

Every writer emits a header row even when there are no data rows, uses
`\n` line endings, and formats floats to six significant digits, so a
repeated run with the same seed produces byte-identical files.
"""

from __future__ import annotations

import math
import os


def fmt(value) -> str:
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return str(value)
        return "%.6g" % value
    return str(value)


def write_csv(path: str, header: list[str], rows: list[tuple]):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def percentile(values: list[float], p: float) -> float:
    """Nearest-rank percentile; p=50 on [1,2,3,4] picks 2."""
    if not values:
        raise ValueError("percentile of empty list")
    if not 0 < p <= 100:
        raise ValueError("percentile must be in (0, 100]")
    ordered = sorted(values)
    rank = math.ceil(p / 100.0 * len(ordered))
    return ordered[rank - 1]


def max_window_speed(arrivals: list[tuple], window_s: float = 1.0) -> float:
    """Largest bits-per-second over any sliding window of received bytes.

    arrivals: (time_ns, payload_bytes, ...) rows in arrival order; extra
    trailing fields are ignored.
    """
    if not arrivals:
        return 0.0
    window_ns = int(window_s * 1e9)
    best = 0
    total = 0
    lo = 0
    for row in arrivals:
        total += row[1]
        while arrivals[lo][0] <= row[0] - window_ns:
            total -= arrivals[lo][1]
            lo += 1
        if total > best:
            best = total
    return best * 8.0 / window_s


def mean_speed(arrivals: list[tuple], start_ns: int, end_ns: int) -> float:
    """Average bits-per-second of arrivals inside [start_ns, end_ns)."""
    if end_ns <= start_ns:
        raise ValueError("empty interval")
    total = sum(row[1] for row in arrivals if start_ns <= row[0] < end_ns)
    return total * 8.0 * 1e9 / (end_ns - start_ns)


def rate_series(arrivals: list[tuple], interval_s: float = 1.0) -> list[tuple[float, float]]:
    """(interval start seconds, payload bits/s) per fixed interval."""
    if not arrivals:
        return []
    interval_ns = int(interval_s * 1e9)
    buckets: dict[int, int] = {}
    for row in arrivals:
        idx = row[0] // interval_ns
        buckets[idx] = buckets.get(idx, 0) + row[1]
    return [
        (idx * interval_s, buckets.get(idx, 0) * 8.0 / interval_s)
        for idx in range(max(buckets) + 1)
    ]


def majority_origin(arrivals: list[tuple], start_ns: int, end_ns: int) -> str | None:
    """Origin tag serving the most packets inside [start_ns, end_ns)."""
    counts: dict[str, int] = {}
    for t, _n, origin in arrivals:
        if start_ns <= t < end_ns:
            counts[origin] = counts.get(origin, 0) + 1
    if not counts:
        return None
    return min(counts, key=lambda k: (-counts[k], k))


def first_time_at_or_above(series: list[tuple[float, float]], level: float) -> float | None:
    """Earliest sample time where the series value reaches level."""
    for t, v in series:
        if v >= level:
            return t
    return None


def first_time_above(series: list[tuple[float, float]], level: float) -> float | None:
    for t, v in series:
        if v > level:
            return t
    return None


def interests_on_link(net, link_id: str, from_node: str, after_ns: int) -> int:
    """Interest transmissions attempted from from_node on a link at or
    after a time, counted from the recorded event log. Attempts onto a
    downed link count (they log as drops); queue-overflow drops do not
    double-count (those names also logged a send)."""
    link = net.links[link_id]
    key = "%s->%s" % (from_node, link.other(from_node))
    n = 0
    for t, event, lid, dkey, kind, _name, _nb, note in net.events:
        if lid != link_id or dkey != key or kind != "Interest" or t < after_ns:
            continue
        if event == "send" or (event == "drop" and note == "down"):
            n += 1
    return n


def utilization_rows(net) -> list[tuple]:
    rows = []
    for link_id in sorted(net.links):
        link = net.links[link_id]
        for sender in sorted(link.dirs):
            d = link.dirs[sender]
            for t_s, util in net.metrics.series(link_id, d.key):
                rows.append((t_s, link_id, d.key, util))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def mean_utilization(net, link_id: str, direction: str, start_s: float, end_s: float) -> float:
    """Average utilization of one link direction over [start_s, end_s)."""
    series = net.metrics.series(link_id, direction)
    span = [u for t, u in series if start_s <= t < end_s]
    if not span:
        return 0.0
    return sum(span) / len(span)


def provenance_rows(consumers: dict[str, dict[str, int]]) -> list[tuple]:
    """consumer -> {origin tag -> packets} to sorted fraction rows."""
    rows = []
    for consumer in sorted(consumers):
        counts = consumers[consumer]
        total = sum(counts.values())
        for server in sorted(counts):
            frac = counts[server] / total if total else 0.0
            rows.append((consumer, server, counts[server], frac))
    return rows


def counter_rows(net) -> list[tuple]:
    rows = []
    for node_id in sorted(net.nodes):
        fwd = net.nodes[node_id].forwarder
        for counter in sorted(fwd.counters):
            rows.append((node_id, counter, fwd.counters[counter]))
    return rows


def aggregate_runs(runs: list[dict], p: float) -> dict:
    """Per-key nearest-rank percentile across repeated runs."""
    if not runs:
        return {}
    keys = set()
    for run in runs:
        keys.update(run)
    return {k: percentile([run[k] for run in runs if k in run], p) for k in sorted(keys)}
