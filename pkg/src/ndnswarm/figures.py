"""Figures rendered alongside the CSV reports.

Everything draws from a finished ScenarioResult; the CSVs stay the
canonical output and these are the same numbers made glanceable.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import metrics


def save_utilization(result, path: str):
    """Per-direction link utilization over time, busiest directions only."""
    net = result.handle.net
    fig, ax = plt.subplots(figsize=(8, 4.5))
    drawn = 0
    for link_id in sorted(net.links):
        link = net.links[link_id]
        for sender in sorted(link.dirs):
            d = link.dirs[sender]
            series = net.metrics.series(link_id, d.key)
            if not series or max(u for _t, u in series) < 0.05:
                continue
            ax.plot(
                [t for t, _u in series],
                [u for _t, u in series],
                label=d.key,
                linewidth=1.0,
            )
            drawn += 1
    ax.set_xlabel("time (s)")
    ax.set_ylabel("utilization")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("%s: link utilization" % result.scenario)
    if drawn:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_provenance(result, path: str):
    """Stacked bar per consumer: which origin served its data packets."""
    consumers = [r for r in result.consumers if r.provenance]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    origins = sorted({o for r in consumers for o in r.provenance})
    bottoms = [0.0] * len(consumers)
    for origin in origins:
        fracs = []
        for r in consumers:
            total = sum(r.provenance.values())
            fracs.append(r.provenance.get(origin, 0) / total if total else 0.0)
        ax.bar([r.node for r in consumers], fracs, bottom=bottoms, label=origin)
        bottoms = [b + f for b, f in zip(bottoms, fracs)]
    ax.set_ylabel("fraction of data packets")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("%s: provenance" % result.scenario)
    if origins:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_rates(result, path: str):
    """Per-consumer download rate over time."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    drawn = 0
    for r in result.consumers:
        app = result.handle.consumers[r.node]
        series = metrics.rate_series(app.arrivals)
        if not series:
            continue
        ax.plot(
            [t for t, _b in series],
            [b / 1e6 for _t, b in series],
            label=r.node,
            linewidth=1.0,
        )
        drawn += 1
    ax.set_xlabel("time (s)")
    ax.set_ylabel("Mbps")
    ax.set_title("%s: download rate" % result.scenario)
    if drawn:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_all(result, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for fname, fn in (
        ("utilization.png", save_utilization),
        ("provenance.png", save_provenance),
        ("rates.png", save_rates),
    ):
        path = os.path.join(out_dir, fname)
        fn(result, path)
        paths.append(path)
    return paths
